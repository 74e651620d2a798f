"""Brute-force per-pixel renderer used as the rasterizer's oracle.

No tiling, no footprint culling: every retained Gaussian is evaluated at
every pixel with the same compositing rules as the tile kernel (3-sigma
ellipse membership, alpha clamp/skip, transmittance cutoff).  The
``textured_exact`` sub-mode calls the UV MLP at every intersection instead
of the Taylor approximation, which is what the Taylor-error experiments
measure against.
"""

from __future__ import annotations

import numpy as np

from ..intersect import GRAZING_EPS
from ..scene import Camera, GaussianSet, sh_basis
from ..texture import Texture
from .common import (ALPHA_CLAMP, ALPHA_SKIP, MODE_PREFETCH, MODE_TEXTURED,
                     MODE_TEXTURED_NOSH, MODE_VANILLA, POWER_CUTOFF, T_CUTOFF,
                     mode_id, prepare_frame)
from .forward import RenderOutput


def render_reference(scene: GaussianSet, cam: Camera, texture: Texture | None = None,
                     mode: str = "vanilla", exact_uv_mapper=None) -> RenderOutput:
    """Reference rasterization; ``mode='textured_exact'`` needs ``exact_uv_mapper``."""
    exact = mode == "textured_exact"
    mid = mode_id("textured" if exact else mode)
    if exact and exact_uv_mapper is None:
        raise ValueError("textured_exact requires the UV mapper")
    prep = prepare_frame(scene, cam, mid)

    H, W = cam.height, cam.width
    C = np.zeros((H, W, 3))
    Cn = np.zeros((H, W, 3)) if mid == MODE_TEXTURED else None
    D = np.zeros((H, W))
    Nm = np.zeros((H, W, 3))
    A = np.zeros((H, W))
    T = np.ones((H, W))
    done = np.zeros((H, W), dtype=bool)

    order = np.lexsort((np.arange(len(prep.proj.indices)), prep.proj.depth))
    dirs = cam.ray_dirs()
    origin = cam.origin
    basis = sh_basis(dirs) if mid in (MODE_VANILLA, MODE_TEXTURED) else None

    px = np.arange(W) + 0.5
    py = np.arange(H) + 0.5
    gx, gy = np.meshgrid(px, py)

    for g in order:
        dx = gx - prep.proj.mean2d[g, 0]
        dy = gy - prep.proj.mean2d[g, 1]
        a, b, c = prep.conic_packed[g]
        power = 0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        alpha = np.minimum(prep.opacity[g] * np.exp(-np.minimum(power, 80.0)), ALPHA_CLAMP)
        skip = (power > POWER_CUTOFF) | (alpha < ALPHA_SKIP)
        test_T = T * (1.0 - alpha)
        done |= ~skip & (test_T < T_CUTOFF)
        active = ~skip & ~done
        if not active.any():
            continue
        w = np.where(active, alpha * T, 0.0)

        if mid == MODE_VANILLA:
            rgb = basis @ prep.sh[g] + 0.5
            rgb_n = None
        elif mid == MODE_PREFETCH:
            rgb = np.broadcast_to(texture.sample_bilinear(prep.uv_mu[g]), (H, W, 3))
            rgb_n = None
        else:
            uv = _intersection_uv(prep, g, origin, dirs, exact_uv_mapper if exact else None)
            tex_rgb = texture.sample_bilinear(uv)
            if mid == MODE_TEXTURED:
                rgb = tex_rgb + basis @ prep.sh[g]
                rgb_n = tex_rgb
            else:
                rgb = tex_rgb
                rgb_n = None

        C += w[..., None] * rgb
        if Cn is not None:
            Cn += w[..., None] * rgb_n
        D += w * prep.proj.depth[g]
        Nm += w[..., None] * prep.normals[g]
        A += w
        T = np.where(active, test_T, T)

    return RenderOutput(color=C, depth=D, normal=Nm, alpha=A, color_nosh=Cn,
                        final_T=T, n_contrib=None, mode=mode)


def _intersection_uv(prep, g, origin, dirs, mapper):
    """Per-pixel clamped intersection UVs for one Gaussian (vectorized)."""
    n = prep.normals[g]
    mu = prep.mu[g]
    dn = dirs @ n
    grazing = np.abs(dn) < GRAZING_EPS
    tau = ((mu - origin) @ n) / np.where(grazing, 1.0, dn)
    hit = origin + tau[..., None] * dirs
    delta = np.where(grazing[..., None], 0.0, hit - mu)

    local = delta @ prep.rot[g]  # row-vector form of R^T delta
    local = np.clip(local, -prep.bound[g], prep.bound[g])
    offset = local @ prep.rot[g].T

    if mapper is None:
        uv = prep.uv_mu[g] + offset @ prep.jac_mu[g].T
        u = uv[..., 0] % 1.0
        v = np.clip(uv[..., 1], 0.0, 1.0)
        return np.stack([u, v], axis=-1)
    pts = (mu + offset).reshape(-1, 3)
    return mapper.forward_uv(pts).reshape(dirs.shape[:-1] + (2,))
