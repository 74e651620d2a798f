"""Equirectangular chart between the unit sphere and the (u, v) square.

``u`` is longitude scaled to [0, 1) and wraps; ``v = arccos(z) / pi`` is
colatitude in [0, 1].  Poles map to v in {0, 1} with u fixed to 0 by
convention.
"""

from __future__ import annotations

import numpy as np

POLE_Z = 0.999  # |z| above this: the u-row of the chart Jacobian is unreliable


def sphere_to_uv(p: np.ndarray) -> np.ndarray:
    """Map unit-sphere points (..., 3) to (u, v) in [0,1) x [0,1]."""
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    u = (np.arctan2(y, x) + np.pi) / (2.0 * np.pi)
    u = np.where((x == 0.0) & (y == 0.0), 0.0, u % 1.0)
    v = np.arccos(np.clip(z, -1.0, 1.0)) / np.pi
    return np.stack([u, v], axis=-1)


def uv_to_sphere(uv: np.ndarray) -> np.ndarray:
    """Inverse chart: (u, v) to unit-sphere points."""
    uv = np.asarray(uv, dtype=np.float64)
    lon = 2.0 * np.pi * uv[..., 0] - np.pi
    theta = np.pi * uv[..., 1]
    st = np.sin(theta)
    return np.stack([st * np.cos(lon), st * np.sin(lon), np.cos(theta)], axis=-1)


def chart_jacobian(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d(u, v)/dp for sphere points (..., 3).

    Returns ``(J, pole_flag)`` where J has shape (..., 2, 3).  Within the
    pole band (|z| > POLE_Z) the u-row is zeroed and flagged: longitude is
    ill-conditioned there and Taylor consumers treat u as locally constant.
    The v-row denominator is clamped at the band edge so it stays finite.
    """
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    rho2 = x * x + y * y
    pole = np.abs(z) > POLE_Z

    J = np.zeros(p.shape[:-1] + (2, 3), dtype=np.float64)
    safe_rho2 = np.where(rho2 > 0.0, rho2, 1.0)
    J[..., 0, 0] = np.where(pole, 0.0, -y / (2.0 * np.pi * safe_rho2))
    J[..., 0, 1] = np.where(pole, 0.0, x / (2.0 * np.pi * safe_rho2))

    sin_theta = np.sqrt(np.maximum(1.0 - z * z, 1.0 - POLE_Z * POLE_Z))
    J[..., 1, 2] = -1.0 / (np.pi * sin_theta)
    return J, pole


def wrap_u_delta(du: np.ndarray) -> np.ndarray:
    """Shortest signed difference of u coordinates across the seam."""
    return (np.asarray(du) + 0.5) % 1.0 - 0.5


def sphere_chord(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Chordal (Euclidean) distance between sphere points; max value 2."""
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)
