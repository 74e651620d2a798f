"""Bijectivity losses for the UV mapping pair (evaluation forms).

These are the plain, full-precision definitions used by tests and
diagnostics; the trainer re-implements them fused with backpropagation.
"""

from __future__ import annotations

import numpy as np

from .charts import sphere_chord, uv_to_sphere


def loss_cycle3d(mapper, points: np.ndarray) -> float:
    """Mean reconstruction distance ``|x - inv(fwd(x))|`` in world units."""
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rec = mapper.inverse_from_sphere(mapper.forward_sphere(x))
    return float(np.linalg.norm(x - rec, axis=-1).mean())


def loss_chamfer(mapper, uv_samples: np.ndarray, pseudo_gt: np.ndarray) -> float:
    """Symmetric Chamfer distance (unsquared norms) between inv(U) and P."""
    xw = mapper.inverse_point(uv_samples)
    p = np.atleast_2d(np.asarray(pseudo_gt, dtype=np.float64))
    d = np.linalg.norm(xw[:, None, :] - p[None, :, :], axis=-1)
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def loss_cycle2d(mapper, uv_samples: np.ndarray) -> float:
    """Mean chordal sphere distance between U and fwd(inv(U)).

    The chordal metric compares sphere points rather than raw chart
    coordinates, so equivalent UVs across the seam cost nothing.
    """
    uv = np.atleast_2d(np.asarray(uv_samples, dtype=np.float64))
    target = uv_to_sphere(uv)
    mapped = mapper.forward_sphere(mapper.inverse_point(uv))
    return float(sphere_chord(target, mapped).mean())
