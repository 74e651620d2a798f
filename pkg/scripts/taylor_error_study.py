"""Second-order behavior of the Taylor UV lookup.

Builds flattened sphere-surface Gaussians at a ladder of scales and
measures the weighted mean UV error of the first-order lookup against the
exact forward map at the ray intersections.  Error should fall ~4x per
scale halving.
"""

import argparse

import numpy as np

from texsplat.evaluate import taylor_uv_error
from texsplat.scene import GaussianSet, look_at_camera
from texsplat.trainer import rotation_from_normals
from texsplat.uvmap.mlp import UvMapper


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mapper", default=None, help="trained .ckpt (default: random net)")
    ap.add_argument("--scales", default="0.12,0.06,0.03,0.015")
    ap.add_argument("--n", type=int, default=400)
    args = ap.parse_args()

    if args.mapper:
        mapper = UvMapper.load(args.mapper)
    else:
        mapper = UvMapper(rng=np.random.default_rng(3))
        mapper.set_normalization([0, 0, 0], 1.2)

    rng = np.random.default_rng(7)
    pts = rng.normal(size=(args.n, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    quats = rotation_from_normals(pts, rng)
    cam = look_at_camera([0, 0, 3.0], [0, 0, 0], 128, 128)

    prev = None
    print(f"{'scale':>8} {'mean uv err':>12} {'ratio':>7}")
    for scale in (float(s) for s in args.scales.split(",")):
        scene = GaussianSet(positions=pts, quats=quats,
                            log_scales=np.tile([np.log(scale), np.log(scale), -20.0],
                                               (args.n, 1)),
                            opacity_logits=np.full(args.n, 4.0),
                            sh=np.zeros((args.n, 16, 3)))
        mapper.cache_scene_uv(scene)
        err = taylor_uv_error(scene, cam, mapper)
        ratio = "" if prev is None else f"{prev / err:7.2f}"
        print(f"{scale:8.4f} {err:12.3e} {ratio:>7}")
        prev = err


if __name__ == "__main__":
    main()
