"""Adaptive-moment optimizer over named numpy parameter groups."""

from __future__ import annotations

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-15


class Adam:
    """Standard bias-corrected Adam; parameters are updated in place.

    ``params`` maps names to arrays; per-group learning rates come from
    ``lrs``.  Moment state can be filtered alongside pruning and selectively
    zeroed (used when the trainer pins flattened scale axes).
    """

    def __init__(self, params: dict[str, np.ndarray], lrs: dict[str, float]):
        self.params = params
        self.lrs = dict(lrs)
        self.m = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        self.v = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - BETA1 ** self.t
        bc2 = 1.0 - BETA2 ** self.t
        for name, g in grads.items():
            if g is None or name not in self.params:
                continue
            p = self.params[name]
            m = self.m[name]
            v = self.v[name]
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * np.square(g)
            update = self.lrs[name] * (m / bc1) / (np.sqrt(v / bc2) + EPS)
            p -= update.astype(p.dtype, copy=False)

    def filter_state(self, name: str, keep) -> None:
        self.m[name] = self.m[name][keep]
        self.v[name] = self.v[name][keep]

    def zero_state_where(self, name: str, mask) -> None:
        self.m[name][mask] = 0.0
        self.v[name][mask] = 0.0
