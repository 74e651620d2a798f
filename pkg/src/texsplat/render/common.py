"""Per-frame host-side preparation shared by the tile rasterizer.

A frame prep culls and projects the scene, orients normals toward the
camera, gathers the textured-mode per-Gaussian data (local frames, clamp
bounds, cached UVs/Jacobians) and bins footprints into 16x16 screen tiles
sorted front to back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import Camera, GaussianSet, Projected2D, project_ewa, quat_to_rotmat, shortest_axis

TILE = 16
ALPHA_CLAMP = 0.99
ALPHA_SKIP = 1.0 / 255.0
T_CUTOFF = 1e-4
POWER_CUTOFF = 4.5  # 3-sigma ellipse membership in screen space

MODE_VANILLA = 0
MODE_TEXTURED = 1
MODE_TEXTURED_NOSH = 2
MODE_PREFETCH = 3

MODE_NAMES = {
    "vanilla": MODE_VANILLA,
    "textured": MODE_TEXTURED,
    "textured_nosh": MODE_TEXTURED_NOSH,
    "prefetch": MODE_PREFETCH,
}

TEXTURED_MODES = (MODE_TEXTURED, MODE_TEXTURED_NOSH, MODE_PREFETCH)


def mode_id(mode: str) -> int:
    key = mode.lower().replace("-", "_")
    if key not in MODE_NAMES:
        raise ValueError(f"unknown color mode {mode!r}; expected one of {sorted(MODE_NAMES)}")
    return MODE_NAMES[key]


@dataclass
class FramePrep:
    proj: Projected2D
    opacity: np.ndarray        # (M,)
    normals: np.ndarray        # (M, 3) oriented toward the camera
    mu: np.ndarray             # (M, 3)
    rot: np.ndarray            # (M, 3, 3)
    bound: np.ndarray          # (M, 3) 3 * exp(s)
    exp_s: np.ndarray          # (M, 3)
    uv_mu: np.ndarray          # (M, 2)
    jac_mu: np.ndarray         # (M, 2, 3)
    sh: np.ndarray             # (M, 16, 3)
    conic_packed: np.ndarray   # (M, 3) upper-triangle (a, b, c)
    pair_gauss: np.ndarray     # (P,) int32 indices into the kept arrays
    tile_start: np.ndarray     # (ntiles,) int64
    tile_end: np.ndarray
    ntx: int
    nty: int


def prepare_frame(scene: GaussianSet, cam: Camera, mode: int) -> FramePrep:
    if mode in TEXTURED_MODES:
        scene.require_fresh_uv()

    proj = project_ewa(scene.positions, scene.quats, scene.log_scales, cam)
    keep = proj.indices
    opacity = scene.opacities[keep]
    mu = scene.positions[keep]
    quats = scene.quats[keep]
    log_s = scene.log_scales[keep]

    v = shortest_axis(quats, log_s)
    to_mu = mu - cam.origin
    flip = np.sum(v * to_mu, axis=-1) >= 0.0
    normals = np.where(flip[:, None], -v, v)

    rot = quat_to_rotmat(quats)
    exp_s = np.exp(log_s)
    conic_packed = np.stack([proj.conic[:, 0, 0], proj.conic[:, 0, 1], proj.conic[:, 1, 1]], axis=-1)

    ntx = (cam.width + TILE - 1) // TILE
    nty = (cam.height + TILE - 1) // TILE
    pair_gauss, tile_start, tile_end = _bin_tiles(proj, ntx, nty)

    return FramePrep(
        proj=proj, opacity=opacity, normals=normals, mu=mu, rot=rot,
        bound=3.0 * exp_s, exp_s=exp_s,
        uv_mu=scene.uv_mu[keep], jac_mu=scene.jac_mu[keep], sh=scene.sh[keep],
        conic_packed=conic_packed, pair_gauss=pair_gauss,
        tile_start=tile_start, tile_end=tile_end, ntx=ntx, nty=nty,
    )


def _bin_tiles(proj: Projected2D, ntx: int, nty: int):
    m = len(proj.indices)
    ntiles = ntx * nty
    if m == 0:
        z = np.zeros(ntiles, dtype=np.int64)
        return np.zeros(0, dtype=np.int32), z, z.copy()

    mx, my = proj.mean2d[:, 0], proj.mean2d[:, 1]
    r = proj.radius
    x0 = np.clip(np.floor((mx - r) / TILE).astype(np.int64), 0, ntx)
    y0 = np.clip(np.floor((my - r) / TILE).astype(np.int64), 0, nty)
    x1 = np.clip(np.floor((mx + r) / TILE).astype(np.int64) + 1, 0, ntx)
    y1 = np.clip(np.floor((my + r) / TILE).astype(np.int64) + 1, 0, nty)
    w = np.maximum(x1 - x0, 0)
    h = np.maximum(y1 - y0, 0)
    counts = w * h
    total = int(counts.sum())
    if total == 0:
        z = np.zeros(ntiles, dtype=np.int64)
        return np.zeros(0, dtype=np.int32), z, z.copy()

    gauss = np.repeat(np.arange(m, dtype=np.int64), counts)
    ends = np.cumsum(counts)
    local = np.arange(total, dtype=np.int64) - np.repeat(ends - counts, counts)
    gw = np.repeat(w, counts)
    tx = np.repeat(x0, counts) + local % np.maximum(gw, 1)
    ty = np.repeat(y0, counts) + local // np.maximum(gw, 1)
    tile_of = ty * ntx + tx

    # front-to-back within each tile; ties resolved by storage index
    order = np.lexsort((gauss, proj.depth[gauss], tile_of))
    tile_sorted = tile_of[order]
    pair_gauss = gauss[order].astype(np.int32)

    tile_start = np.searchsorted(tile_sorted, np.arange(ntiles))
    tile_end = np.searchsorted(tile_sorted, np.arange(ntiles), side="right")
    return pair_gauss, tile_start.astype(np.int64), tile_end.astype(np.int64)
