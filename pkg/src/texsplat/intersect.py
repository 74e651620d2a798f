"""Rayintersection with flattened Gaussians and the first-order UV lookup.

The intersection is the ray hit on the plane through the Gaussian center
orthogonal to its shortest axis, with the displacement from the center then
clamped (per principal axis, in the Gaussian's local frame) to three
standard deviations so far-field hits cannot fetch unrelated texels.
"""

from __future__ import annotations

import numpy as np

from .scene import quat_to_rotmat

GRAZING_EPS = 1e-8
CLAMP_SIGMAS = 3.0


def intersect(mu: np.ndarray, q: np.ndarray, s: np.ndarray, normal: np.ndarray,
              origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Clamped ray/plane intersection; broadcasts over leading dimensions.

    Grazing rays (|d . n| < 1e-8) fall back to the center itself, which
    degrades that contribution to pre-fetch behavior.
    """
    mu = np.asarray(mu, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)

    dn = np.sum(d * n, axis=-1, keepdims=True)
    grazing = np.abs(dn) < GRAZING_EPS
    tval = np.sum((mu - o) * n, axis=-1, keepdims=True) / np.where(grazing, 1.0, dn)
    hit = o + tval * d

    R = quat_to_rotmat(q)
    bound = CLAMP_SIGMAS * np.exp(np.asarray(s, dtype=np.float64))
    local = np.einsum("...ji,...j->...i", R, hit - mu)
    local = np.clip(local, -bound, bound)
    clamped = mu + np.einsum("...ij,...j->...i", R, local)
    return np.where(grazing, mu, clamped)


def taylor_uv(uv_mu: np.ndarray, jac_mu: np.ndarray, mu: np.ndarray,
              point: np.ndarray) -> np.ndarray:
    """First-order UV estimate ``uv_mu + J (point - mu)``; u wraps, v clamps."""
    off = np.asarray(point, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    uv = np.asarray(uv_mu, dtype=np.float64) + np.einsum("...ij,...j->...i", jac_mu, off)
    u = uv[..., 0] % 1.0
    v = np.clip(uv[..., 1], 0.0, 1.0)
    return np.stack([u, v], axis=-1)
