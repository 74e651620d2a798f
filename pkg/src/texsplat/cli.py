"""Command-line entry points.

Subcommands: synth, train, render, swap, paint, bench, eval, serve.  Every
run prints its fully resolved config; unknown config keys are rejected with
exit code 2, module failures exit 1 with a one-line diagnostic.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import set_threads
from .config import TrainConfig, apply_overrides, load_config, resolved_json


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="render parallelism cap (default: TEXSPLAT_THREADS or all)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="texsplat")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fixture dataset")
    p.add_argument("--kind", choices=["sphere", "plane", "two_sphere"], default="sphere")
    p.add_argument("--out", required=True)
    p.add_argument("--n-views", type=int, default=24)
    p.add_argument("--n-test", type=int, default=4)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--texture", default=None, help="PNG to map on the surface")
    p.add_argument("--checker", default="8x4", help="checkerboard tiles WxH when no texture given")
    p.add_argument("--shading", choices=["none", "baked"], default="none")
    p.add_argument("--n-points", type=int, default=20000)
    _add_common(p)

    p = sub.add_parser("train", help="run the three-stage trainer")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON TrainConfig")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, e.g. --set loss.lambda_nosh=0")
    p.add_argument("--stage", choices=["1", "2", "3", "all"], default="all")
    p.add_argument("--iters", type=int, default=None, help="override stage-1 iterations")
    p.add_argument("--resume", default=None, help="checkpoint dir to continue from")
    p.add_argument("--mode", choices=["textured", "prefetch"], default="textured",
                   help="stage-3 color mode")
    _add_common(p)

    p = sub.add_parser("render", help="render a view or an orbit sequence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", default="textured",
                   choices=["vanilla", "textured", "textured_nosh", "prefetch"])
    p.add_argument("--azimuth", type=float, default=30.0)
    p.add_argument("--elevation", type=float, default=20.0)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--orbit", type=int, default=0, help="render N frames around the object")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--out", required=True, help="output PNG (or directory with --orbit)")
    _add_common(p)

    p = sub.add_parser("swap", help="swap the texture of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--texture", required=True, help="replacement PNG")
    p.add_argument("--shadow-preserve", action="store_true")
    p.add_argument("--out", default=None, help="write to this checkpoint dir (default: in place)")
    _add_common(p)

    p = sub.add_parser("paint", help="paint a stroke into the checkpoint texture")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--radius", type=float, required=True, help="stroke radius in UV units")
    p.add_argument("--rgb", required=True, help="stroke color r,g,b in [0,1]")
    p.add_argument("--opacity", type=float, default=1.0)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("bench", help="FPS vs Gaussian count (opacity pruning ladder)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", default=None, help="adds held-out PSNR columns")
    p.add_argument("--fractions", default="1.0,0.5,0.2,0.05")
    p.add_argument("--frames", type=int, default=12)
    p.add_argument("--mode", default="textured")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--json", dest="json_out", default=None)
    _add_common(p)

    p = sub.add_parser("eval", help="PSNR/L1 on held-out views")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--modes", default="textured,textured_nosh")
    p.add_argument("--json", dest="json_out", default=None)
    _add_common(p)

    p = sub.add_parser("serve", help="start the interactive texture-editing service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8722)
    p.add_argument("--host", default="127.0.0.1")
    _add_common(p)

    return ap


def _cmd_synth(args) -> int:
    from .io_formats.synthetic import checkerboard, make_synthetic_dataset
    from .io_formats import texio

    if args.texture:
        tex = texio.load_png(args.texture)
    else:
        tu, tv = (int(x) for x in args.checker.split("x"))
        tex = checkerboard(256, 512, tiles_u=tu, tiles_v=tv)
    ds = make_synthetic_dataset(args.kind, tex, n_views=args.n_views,
                                resolution=args.resolution,
                                seed=args.seed or 0, out_dir=args.out,
                                n_test=args.n_test, n_points=args.n_points,
                                shading=args.shading)
    print(f"wrote {len(ds.views)} views to {ds.root}")
    return 0


def _cmd_train(args) -> int:
    from .io_formats.synthetic import load_dataset
    from .trainer import Trainer, load_checkpoint

    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for kv in args.set:
        if "=" not in kv:
            raise KeyError(f"override must be KEY=VALUE, got {kv!r}")
        k, v = kv.split("=", 1)
        overrides[k] = v
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    print("resolved config:", resolved_json(cfg), file=sys.stderr)

    ds = load_dataset(args.dataset)
    tr = Trainer(ds, cfg, args.out, mode=args.mode)
    if args.resume:
        scene, mapper, texture, _ = load_checkpoint(args.resume, need_mapper=False)
        tr.scene, tr.mapper = scene, mapper
        if texture is not None:
            from .texture import Texture

            tr.texture = texture
    stage = args.stage
    if stage in ("1", "all"):
        tr.stage1(args.iters if args.iters is not None else None)
    if stage in ("2", "all"):
        tr.stage2()
    if stage in ("3", "all"):
        tr.stage3()
    out = tr.save_checkpoint()
    print(f"checkpoint written to {out}")
    return 0


def _orbit_target(state: dict):
    return np.asarray(state.get("center", [0.0, 0.0, 0.0]), dtype=np.float64)


def _cmd_render(args) -> int:
    from .io_formats import texio
    from .render import render_forward
    from .scene import orbit_camera
    from .trainer import load_checkpoint

    scene, mapper, texture, state = load_checkpoint(args.checkpoint,
                                                    need_mapper=args.mode != "vanilla")
    target = _orbit_target(state)
    if args.orbit:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        for i in range(args.orbit):
            az = 360.0 * i / args.orbit
            cam = orbit_camera(az, args.elevation, args.radius, target,
                               args.width, args.height)
            out = render_forward(scene, cam, texture, mode=args.mode)
            texio.save_png(out.clamped_color(), outdir / f"frame_{i:03d}.png")
        print(f"wrote {args.orbit} frames to {outdir}")
    else:
        cam = orbit_camera(args.azimuth, args.elevation, args.radius, target,
                           args.width, args.height)
        out = render_forward(scene, cam, texture, mode=args.mode)
        texio.save_png(out.clamped_color(), args.out)
        print(f"wrote {args.out}")
    return 0


def _load_ckpt_texture(args, need_mapper=False):
    from .trainer import load_checkpoint

    return load_checkpoint(args.checkpoint, need_mapper=need_mapper)


def _write_texture(args, texture) -> Path:
    import shutil

    from .io_formats import texio

    src = Path(args.checkpoint)
    dst = Path(args.out) if args.out else src
    if dst != src:
        dst.mkdir(parents=True, exist_ok=True)
        for name in ("scene.ply", "uvmap.ckpt", "state.json", "config.json"):
            if (src / name).exists():
                shutil.copy2(src / name, dst / name)
    texio.save_texture_blob(texture.data, dst / "texture.texf")
    texio.save_png(texture.data, dst / "texture.png")
    return dst


def _cmd_swap(args) -> int:
    from .io_formats import texio
    from .texture import swap_texture

    _, _, texture, _ = _load_ckpt_texture(args)
    if texture is None:
        raise FileNotFoundError(f"{args.checkpoint}: no texture.texf to swap")
    new = texio.load_png(args.texture)
    swapped = swap_texture(texture, new, shadow_preserve=args.shadow_preserve)
    dst = _write_texture(args, swapped)
    print(f"texture swapped into {dst}")
    return 0


def _cmd_paint(args) -> int:
    _, _, texture, _ = _load_ckpt_texture(args)
    if texture is None:
        raise FileNotFoundError(f"{args.checkpoint}: no texture.texf to paint")
    rgb = tuple(float(x) for x in args.rgb.split(","))
    if len(rgb) != 3:
        raise ValueError("--rgb must be r,g,b")
    texture.paint((args.u, args.v), args.radius, rgb, args.opacity)
    dst = _write_texture(args, texture)
    print(f"stroke painted into {dst}")
    return 0


def _cmd_bench(args) -> int:
    from .evaluate import bench_fps, eval_views, prune_by_opacity
    from .io_formats.synthetic import load_dataset
    from .scene import orbit_camera
    from .trainer import load_checkpoint

    scene, mapper, texture, state = load_checkpoint(args.checkpoint)
    fractions = [float(x) for x in args.fractions.split(",")]
    ds = load_dataset(args.dataset) if args.dataset else None
    target = _orbit_target(state)

    class _V:
        def __init__(self, camera):
            self.camera = camera

    cams = [_V(orbit_camera(az, 20.0, 3.0, target, args.width, args.height))
            for az in np.linspace(0, 300, 6)]
    rows = []
    print(f"{'keep':>6} {'N':>7} {'FPS':>8}" + ("  PSNR    L1" if ds else ""))
    for frac in fractions:
        sub = prune_by_opacity(scene, frac)
        fps_val = bench_fps(sub, texture, cams, mode=args.mode, frames=args.frames)
        row = {"fraction": frac, "n_gaussians": len(sub), "fps": fps_val}
        line = f"{frac:6.2f} {len(sub):7d} {fps_val:8.2f}"
        if ds:
            m = eval_views(sub, texture, ds.test_views or ds.train_views, args.mode)
            row.update(m)
            line += f"  {m['psnr']:.2f}  {m['l1']:.4f}"
        rows.append(row)
        print(line)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(rows, indent=1))
    return 0


def _cmd_eval(args) -> int:
    from .evaluate import eval_views
    from .io_formats.synthetic import load_dataset
    from .trainer import load_checkpoint

    scene, mapper, texture, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.dataset)
    views = ds.test_views or ds.train_views
    out = {}
    for mode in args.modes.split(","):
        out[mode] = eval_views(scene, texture, views, mode)
        print(f"{mode:15s} psnr {out[mode]['psnr']:.2f}  l1 {out[mode]['l1']:.4f}")
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(out, indent=1))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.checkpoint)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "synth": _cmd_synth, "train": _cmd_train, "render": _cmd_render,
    "swap": _cmd_swap, "paint": _cmd_paint, "bench": _cmd_bench,
    "eval": _cmd_eval, "serve": _cmd_serve,
}

_CONFIG_ERRORS = (KeyError, ValueError, argparse.ArgumentError)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        set_threads(args.threads if getattr(args, "threads", None) else None)
        if getattr(args, "seed", None) is not None:
            np.random.seed(args.seed)
        return _COMMANDS[args.cmd](args)
    except _CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - single-line diagnostic contract
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
