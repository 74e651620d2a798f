"""FPS / quality scaling versus Gaussian count (opacity-pruning ladder)."""

import argparse
import json

import texsplat
from texsplat.evaluate import bench_scaling
from texsplat.io_formats.synthetic import load_dataset
from texsplat.trainer import load_checkpoint


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--fractions", default="1.0,0.5,0.2,0.05")
    ap.add_argument("--frames", type=int, default=20)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    texsplat.set_threads(args.threads)
    scene, mapper, texture, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.dataset)
    rows = bench_scaling(scene, texture, ds,
                         fractions=[float(f) for f in args.fractions.split(",")],
                         frames=args.frames)
    print(f"{'keep':>6} {'N':>7} {'FPS':>8} {'PSNR':>7} {'L1':>8}")
    for r in rows:
        print(f"{r['fraction']:6.2f} {r['n_gaussians']:7d} {r['fps']:8.2f} "
              f"{r['psnr']:7.2f} {r['l1']:8.4f}")
    print(json.dumps(rows))


if __name__ == "__main__":
    main()
