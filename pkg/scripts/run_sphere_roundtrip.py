"""End-to-end sphere round-trip experiment.

Generates the checkerboard-sphere dataset, runs the three training stages,
and reports texture PSNR (GT reprojected into the learned chart), held-out
view PSNR, and the pre-fetching ablation gap.  Mirrors the acceptance runs
with knobs for quicker exploratory sweeps.
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

import texsplat
from texsplat.config import TrainConfig
from texsplat.evaluate import (eval_views, observed_texel_mask,
                               texture_roundtrip_psnr)
from texsplat.io_formats.synthetic import (checkerboard, load_dataset,
                                           make_synthetic_dataset)
from texsplat.trainer import Trainer


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/sphere_roundtrip")
    ap.add_argument("--resolution", type=int, default=256)
    ap.add_argument("--views", type=int, default=24)
    ap.add_argument("--gaussians", type=int, default=3500)
    ap.add_argument("--stage1", type=int, default=4000)
    ap.add_argument("--stage2", type=int, default=10000)
    ap.add_argument("--stage3-tex", type=int, default=2000)
    ap.add_argument("--stage3-joint", type=int, default=6000)
    ap.add_argument("--mode", choices=["textured", "prefetch"], default="textured")
    ap.add_argument("--lambda-nosh", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    texsplat.set_threads(args.threads)
    out = Path(args.out)
    ds_dir = out / "dataset"
    if not (ds_dir / "meta.json").exists():
        make_synthetic_dataset("sphere", checkerboard(256, 512), n_views=args.views,
                               resolution=args.resolution, seed=args.seed,
                               out_dir=ds_dir, n_test=4, n_points=20000)
    ds = load_dataset(ds_dir)

    cfg = TrainConfig(seed=args.seed, n_init_gaussians=args.gaussians,
                      stage1_iters=args.stage1, reg_start=args.stage1 // 4,
                      prune_every=max(args.stage1 // 3, 1),
                      flatten_every=max(args.stage1 // 8, 1),
                      stage3_texture_only=args.stage3_tex,
                      stage3_joint=args.stage3_joint,
                      texture_height=256, texture_width=512)
    cfg.uv.steps = args.stage2
    cfg.loss.lambda_nosh = args.lambda_nosh

    t0 = time.time()
    tr = Trainer(ds, cfg, out / f"ckpt_{args.mode}", mode=args.mode)
    tr.stage1()
    tr.stage2()
    tr.stage3()
    tr.save_checkpoint()
    minutes = (time.time() - t0) / 60

    obs = observed_texel_mask(tr.scene, tr.texture, ds.train_views,
                              mode=args.mode if args.mode == "prefetch" else "textured")
    results = {
        "minutes": minutes,
        "n_gaussians": len(tr.scene),
        "texture_psnr": texture_roundtrip_psnr(tr.mapper, tr.texture, ds, observed=obs),
        "heldout": eval_views(tr.scene, tr.texture, ds.test_views, "textured"),
        "heldout_nosh": eval_views(tr.scene, tr.texture, ds.test_views, "textured_nosh"),
    }
    print(json.dumps(results, indent=1))
    (out / f"results_{args.mode}.json").write_text(json.dumps(results, indent=1))


if __name__ == "__main__":
    main()
