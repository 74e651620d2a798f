"""Host wrapper for the forward tile rasterizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import Camera, GaussianSet
from ..texture import Texture
from . import kernels
from .common import MODE_PREFETCH, MODE_TEXTURED, mode_id, prepare_frame

_DUMMY_TEX = np.zeros((1, 1, 3), dtype=np.float32)
_DUMMY_RGB = np.zeros((1, 3), dtype=np.float64)


@dataclass
class RenderOutput:
    color: np.ndarray            # (H, W, 3) linear RGB
    depth: np.ndarray            # (H, W) blended center depths
    normal: np.ndarray           # (H, W, 3) blended oriented normals
    alpha: np.ndarray            # (H, W) accumulated opacity
    color_nosh: np.ndarray | None  # texture-only color (textured mode)
    final_T: np.ndarray | None   # per-pixel transmittance after compositing
    n_contrib: np.ndarray | None  # per-pixel contributor count (tile-list position)
    mode: str

    def clamped_color(self) -> np.ndarray:
        return np.clip(self.color, 0.0, 1.0)


def render_forward(scene: GaussianSet, cam: Camera, texture: Texture | None = None,
                   mode: str = "vanilla") -> RenderOutput:
    mid = mode_id(mode)
    if mid != kernels.MODE_VANILLA and texture is None:
        raise ValueError(f"mode {mode!r} requires a texture")
    prep = prepare_frame(scene, cam, mid)

    if mid == MODE_PREFETCH:
        prefetch_rgb = np.ascontiguousarray(texture.sample_bilinear(prep.uv_mu))
    else:
        prefetch_rgb = _DUMMY_RGB
    tex = texture.data if texture is not None else _DUMMY_TEX

    H, W = cam.height, cam.width
    out_color = np.zeros((H, W, 3))
    out_nosh = np.zeros((H, W, 3)) if mid == MODE_TEXTURED else np.zeros((1, 1, 3))
    out_depth = np.zeros((H, W))
    out_normal = np.zeros((H, W, 3))
    out_alpha = np.zeros((H, W))
    out_T = np.ones((H, W))
    out_nc = np.zeros((H, W), dtype=np.int32)

    kernels.forward_kernel(
        prep.tile_start, prep.tile_end, prep.pair_gauss, prep.ntx, W, H, mid,
        prep.proj.mean2d, prep.conic_packed, prep.proj.depth, prep.opacity,
        prep.sh, prefetch_rgb, prep.normals, prep.mu, prep.rot, prep.bound,
        prep.uv_mu, prep.jac_mu, tex,
        cam.fx, cam.fy, cam.cx, cam.cy, cam.R, cam.origin,
        out_color, out_nosh, out_depth, out_normal, out_alpha, out_T, out_nc)

    return RenderOutput(color=out_color, depth=out_depth, normal=out_normal,
                        alpha=out_alpha,
                        color_nosh=out_nosh if mid == MODE_TEXTURED else None,
                        final_T=out_T, n_contrib=out_nc, mode=mode)
