"""Learnable 2D texture over the equirectangular sphere domain.

Texels are linear RGB float32.  Addressing wraps in u (the longitude seam)
and clamps in v; texel centers sit at ``((i + 0.5)/W, (j + 0.5)/H)``.
"""

from __future__ import annotations

import numpy as np

DEFAULT_HEIGHT = 512
DEFAULT_WIDTH = 1024


class Texture:
    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError("texture data must be (H, W, 3)")
        self.data = data

    @classmethod
    def constant(cls, value=0.5, height: int = DEFAULT_HEIGHT, width: int = DEFAULT_WIDTH) -> "Texture":
        return cls(np.full((height, width, 3), value, dtype=np.float32))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "Texture":
        return Texture(self.data.copy())

    def _corners(self, uv: np.ndarray):
        uv = np.asarray(uv, dtype=np.float64)
        H, W = self.height, self.width
        x = (uv[..., 0] % 1.0) * W - 0.5
        y = np.clip(uv[..., 1], 0.0, 1.0) * H - 0.5
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        tx = x - x0
        ty = y - y0
        c0 = x0 % W
        c1 = (x0 + 1) % W
        r0 = np.clip(y0, 0, H - 1)
        r1 = np.clip(y0 + 1, 0, H - 1)
        return c0, c1, r0, r1, tx, ty

    def sample_bilinear(self, uv: np.ndarray) -> np.ndarray:
        """Bilinear lookup for (..., 2) UVs; wraps the u seam, clamps v."""
        c0, c1, r0, r1, tx, ty = self._corners(uv)
        d = self.data.astype(np.float64)
        txe, tye = tx[..., None], ty[..., None]
        return ((1 - txe) * (1 - tye) * d[r0, c0] + txe * (1 - tye) * d[r0, c1] +
                (1 - txe) * tye * d[r1, c0] + txe * tye * d[r1, c1])

    def sample_bilinear_adjoint(self, uv: np.ndarray, grad_rgb: np.ndarray,
                                grad_texels: np.ndarray | None = None):
        """Adjoint of :meth:`sample_bilinear`.

        Accumulates texel gradients (creating the buffer if needed) and
        returns ``(grad_uv, grad_texels)``; ``grad_uv`` is the pullback onto
        the sample position.
        """
        if grad_texels is None:
            grad_texels = np.zeros((self.height, self.width, 3), dtype=np.float64)
        c0, c1, r0, r1, tx, ty = self._corners(uv)
        g = np.asarray(grad_rgb, dtype=np.float64)
        txe, tye = tx[..., None], ty[..., None]
        flat = grad_texels.reshape(-1, 3)
        W = self.width
        np.add.at(flat, (r0 * W + c0).ravel(), ((1 - txe) * (1 - tye) * g).reshape(-1, 3))
        np.add.at(flat, (r0 * W + c1).ravel(), (txe * (1 - tye) * g).reshape(-1, 3))
        np.add.at(flat, (r1 * W + c0).ravel(), ((1 - txe) * tye * g).reshape(-1, 3))
        np.add.at(flat, (r1 * W + c1).ravel(), (txe * tye * g).reshape(-1, 3))

        d = self.data.astype(np.float64)
        d_dtx = np.sum(((1 - tye) * (d[r0, c1] - d[r0, c0]) + tye * (d[r1, c1] - d[r1, c0])) * g, axis=-1)
        d_dty = np.sum(((1 - txe) * (d[r1, c0] - d[r0, c0]) + txe * (d[r1, c1] - d[r0, c1])) * g, axis=-1)
        grad_uv = np.stack([d_dtx * self.width, d_dty * self.height], axis=-1)
        return grad_uv, grad_texels

    def paint(self, center_uv, radius: float, rgb, opacity: float) -> None:
        """Alpha-over a disk of stroke color; the disk wraps across the u seam."""
        if radius <= 0:
            raise ValueError("stroke radius must be positive")
        if not 0.0 <= opacity <= 1.0:
            raise ValueError("stroke opacity must lie in [0, 1]")
        if opacity == 0.0:
            return
        H, W = self.height, self.width
        u0, v0 = float(center_uv[0]) % 1.0, float(center_uv[1])
        us = (np.arange(W) + 0.5) / W
        vs = (np.arange(H) + 0.5) / H
        du = (us - u0 + 0.5) % 1.0 - 0.5
        dv = vs - v0
        dist2 = du[None, :] ** 2 + dv[:, None] ** 2
        inside = dist2 <= radius * radius
        color = np.asarray(rgb, dtype=np.float32).reshape(1, 3)
        self.data[inside] = (1.0 - opacity) * self.data[inside] + opacity * color


def ambient_mask(original: Texture) -> np.ndarray:
    """Per-texel scalar shading mask ``mean(min(3 * T_ori, 1))`` over channels."""
    return np.minimum(original.data.astype(np.float64) * 3.0, 1.0).mean(axis=2)


def resample_to(data: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resample of an (h, w, 3) image onto (height, width)."""
    src = Texture(np.asarray(data, dtype=np.float32))
    us = (np.arange(width) + 0.5) / width
    vs = (np.arange(height) + 0.5) / height
    uu, vv = np.meshgrid(us, vs)
    return src.sample_bilinear(np.stack([uu, vv], axis=-1)).astype(np.float32)


def swap_texture(current: Texture, new_data: np.ndarray, shadow_preserve: bool = False) -> Texture:
    """Replace the texture contents, optionally modulating by the ambient mask.

    The replacement is resampled to the current resolution; with
    ``shadow_preserve`` each new texel is scaled by the original texel's
    ambient mask so baked shading survives the swap.
    """
    resampled = resample_to(new_data, current.height, current.width)
    if shadow_preserve:
        resampled = (resampled * ambient_mask(current)[..., None]).astype(np.float32)
    return Texture(resampled)
