"""Dense multi-resolution 2D grid encoding of (u, v).

Feature planes are bilinearly interpolated; the u axis wraps at the seam,
the v axis clamps.  The domain is two-dimensional so dense grids stay small
and collision-free, which replaces hash encodings at this scale.
"""

from __future__ import annotations

import numpy as np

DEFAULT_LEVELS = (16, 32, 64, 128)
FEATURES_PER_LEVEL = 4


class GridEncoding:
    def __init__(self, levels=DEFAULT_LEVELS, features: int = FEATURES_PER_LEVEL,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.levels = tuple(int(l) for l in levels)
        self.features = int(features)
        rng = rng or np.random.default_rng(0)
        # one (res, res, F) plane per level, tiny init like grid encodings use
        self.planes = [
            rng.uniform(-1e-4, 1e-4, size=(res, res, self.features)).astype(dtype)
            for res in self.levels
        ]

    @property
    def out_dim(self) -> int:
        return len(self.levels) * self.features

    def params(self) -> list[np.ndarray]:
        return self.planes

    def _locate(self, uv: np.ndarray, res: int):
        u = np.asarray(uv[..., 0]) % 1.0
        v = np.clip(np.asarray(uv[..., 1]), 0.0, 1.0)
        x = u * res - 0.5
        y = v * (res - 1)
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        tx = x - x0
        ty = y - y0
        c0 = x0 % res
        c1 = (x0 + 1) % res
        r0 = np.clip(y0, 0, res - 1)
        r1 = np.clip(y0 + 1, 0, res - 1)
        return c0, c1, r0, r1, tx, ty

    def forward(self, uv: np.ndarray):
        """Encode (..., 2) UVs to (..., out_dim) features plus a backprop context."""
        outs = []
        ctx = []
        for plane, res in zip(self.planes, self.levels):
            c0, c1, r0, r1, tx, ty = self._locate(uv, res)
            f00 = plane[r0, c0]
            f01 = plane[r0, c1]
            f10 = plane[r1, c0]
            f11 = plane[r1, c1]
            txe = tx[..., None]
            tye = ty[..., None]
            out = ((1 - txe) * (1 - tye) * f00 + txe * (1 - tye) * f01 +
                   (1 - txe) * tye * f10 + txe * tye * f11)
            outs.append(out)
            ctx.append((c0, c1, r0, r1, tx, ty, f00, f01, f10, f11))
        return np.concatenate(outs, axis=-1), ctx

    def backward(self, ctx, grad_out: np.ndarray, grad_planes: list[np.ndarray] | None = None):
        """Scatter feature gradients into the planes; return d(out)/d(uv) pullback.

        ``grad_out`` has shape (..., out_dim).  Returns (grad_uv, grad_planes)
        where grad_uv is (..., 2).  grad_uv's v component is valid only away
        from the clamp (rows equal there, making it zero automatically).
        """
        if grad_planes is None:
            grad_planes = [np.zeros_like(p, dtype=np.float64) for p in self.planes]
        grad_uv = np.zeros(grad_out.shape[:-1] + (2,), dtype=np.float64)
        off = 0
        for li, (plane, res) in enumerate(zip(self.planes, self.levels)):
            g = grad_out[..., off:off + self.features]
            off += self.features
            c0, c1, r0, r1, tx, ty, f00, f01, f10, f11 = ctx[li]
            txe = tx[..., None]
            tye = ty[..., None]
            w00 = (1 - txe) * (1 - tye)
            w01 = txe * (1 - tye)
            w10 = (1 - txe) * tye
            w11 = txe * tye
            flat = grad_planes[li].reshape(-1, self.features)
            np.add.at(flat, (r0 * res + c0).ravel(), (w00 * g).reshape(-1, self.features))
            np.add.at(flat, (r0 * res + c1).ravel(), (w01 * g).reshape(-1, self.features))
            np.add.at(flat, (r1 * res + c0).ravel(), (w10 * g).reshape(-1, self.features))
            np.add.at(flat, (r1 * res + c1).ravel(), (w11 * g).reshape(-1, self.features))

            d_dtx = np.sum(((1 - tye) * (f01 - f00) + tye * (f11 - f10)) * g, axis=-1)
            d_dty = np.sum(((1 - txe) * (f10 - f00) + txe * (f11 - f01)) * g, axis=-1)
            grad_uv[..., 0] += d_dtx * res
            grad_uv[..., 1] += d_dty * (res - 1)
        return grad_uv, grad_planes

    def forward_fast(self, uv: np.ndarray):
        """Numba path used in the training loop; same math as :meth:`forward`."""
        from .fastops import grid_forward_level

        B = uv.shape[0]
        us = np.ascontiguousarray(uv[:, 0], dtype=np.float64)
        vs = np.ascontiguousarray(uv[:, 1], dtype=np.float64)
        out = np.empty((B, self.out_dim), dtype=np.float32)
        ctx = []
        off = 0
        for plane, res in zip(self.planes, self.levels):
            corners = np.empty((B, 4), dtype=np.int64)
            fracs = np.empty((B, 2), dtype=np.float64)
            grid_forward_level(plane, us, vs, out, off, corners, fracs)
            ctx.append((corners, fracs))
            off += self.features
        return out, ctx

    def backward_fast(self, ctx, grad_out: np.ndarray, grad_planes: list[np.ndarray]):
        from .fastops import grid_backward_level

        B = grad_out.shape[0]
        grad_uv = np.zeros((B, 2), dtype=np.float64)
        g = np.ascontiguousarray(grad_out, dtype=np.float64)
        off = 0
        for li, plane in enumerate(self.planes):
            corners, fracs = ctx[li]
            grid_backward_level(plane, grad_planes[li], g, off, corners, fracs, grad_uv)
            off += self.features
        return grad_uv, grad_planes

    def state_dict(self) -> dict:
        return {"levels": list(self.levels), "features": self.features}
