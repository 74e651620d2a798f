"""Surface-sample pipeline feeding the UV-mapping losses.

Back-projected depth pixels approximate the underlying surface; the
pseudo-GT cloud comes from farthest point sampling on Gaussian centers; UV
samples are drawn area-uniform on the sphere so the inverse map is pulled
toward an even surface coverage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import Camera

ALPHA_KEEP = 0.5


@dataclass
class SurfaceSamples:
    surface_points: np.ndarray   # (N_d, 3) back-projected depth pixels
    pseudo_gt: np.ndarray        # (N_p, 3) FPS subset of Gaussian centers
    bbox_center: np.ndarray
    bbox_scale: float


def backproject_depth(depth: np.ndarray, cam: Camera, alpha: np.ndarray,
                      max_points: int | None = None,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """World-space points for pixels whose accumulated opacity passes 0.5."""
    depth = np.asarray(depth, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    keep = alpha >= ALPHA_KEEP
    ys, xs = np.nonzero(keep)
    if len(xs) == 0:
        return np.zeros((0, 3))
    d = depth[ys, xs]
    px = xs + 0.5
    py = ys + 0.5
    cam_pts = np.stack([(px - cam.cx) / cam.fx * d, (py - cam.cy) / cam.fy * d, d], axis=-1)
    world = (cam_pts - cam.t) @ cam.R
    if max_points is not None and len(world) > max_points:
        rng = rng or np.random.default_rng(0)
        world = world[rng.choice(len(world), size=max_points, replace=False)]
    return world


def fps(points: np.ndarray, k: int) -> np.ndarray:
    """Greedy farthest point sampling seeded at index 0; returns the subset."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k > n:
        raise ValueError(f"fps: requested {k} points from a cloud of {n}")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = 0
    dist = np.linalg.norm(pts - pts[0], axis=-1)
    for i in range(1, k):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=-1))
    return pts[chosen]


def sample_sphere_uniform(n: int, rng: np.random.Generator) -> np.ndarray:
    """Area-uniform sphere samples expressed as (u, v) chart coordinates."""
    if n < 1:
        raise ValueError("need at least one sample")
    u = rng.random(n)
    v = np.arccos(1.0 - 2.0 * rng.random(n)) / np.pi
    return np.stack([u, v], axis=-1)
