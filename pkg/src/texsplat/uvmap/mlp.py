"""The UV-mapping MLP pair: forward map to the sphere chart and its inverse.

Both networks are four fully-connected layers, hidden width 128, softplus
hidden activations (smooth so the forward map has a meaningful analytic
Jacobian everywhere).  The forward head divides by ``softplus(100 * |y|)/100``
instead of ``|y|``: identical to unit normalization whenever ``|y| > ~0.15``
(the difference underflows in double precision) but finite at ``y = 0``.

Weights are canonically float32 (checkpoints are a JSON header plus a raw
little-endian float32 blob, bit-exact on round trip); evaluation upcasts to
float64 where tests require tight finite-difference agreement.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .charts import chart_jacobian, sphere_to_uv, uv_to_sphere
from .encoding import GridEncoding

HIDDEN = 128
HEAD_BETA = 100.0

CKPT_MAGIC = b"TXUV"


def softplus(x):
    # max(x, 0) + log1p(exp(-|x|)): overflow-free and cheap to vectorize
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    # tanh form: SIMD-vectorized and overflow-free for any argument
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _head_g(r):
    # softplus(100 r) / 100, exact to float64 beyond r ~ 0.37
    return np.where(r > 0.37, r, np.log1p(np.exp(np.minimum(HEAD_BETA * r, 37.0))) / HEAD_BETA)


def _head_gprime(r):
    return sigmoid(HEAD_BETA * r)


def sphere_head(y: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(y, axis=-1, keepdims=True)
    return y / _head_g(r)


def sphere_head_vjp(y: np.ndarray, grad_p: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(y, axis=-1, keepdims=True)
    rs = np.maximum(r, 1e-30)
    g = _head_g(r)
    gp = _head_gprime(r)
    ydg = np.sum(y * grad_p, axis=-1, keepdims=True)
    return grad_p / g - (gp / (g * g * rs)) * ydg * y


def sphere_head_jacobian(y: np.ndarray) -> np.ndarray:
    """(..., 3, 3) Jacobian of the head (symmetric)."""
    r = np.linalg.norm(y, axis=-1, keepdims=True)
    rs = np.maximum(r, 1e-30)
    g = _head_g(r)
    gp = _head_gprime(r)
    eye = np.eye(3)
    outer = y[..., :, None] * y[..., None, :]
    return eye / g[..., None] - (gp / (g * g * rs))[..., None] * outer


class Mlp:
    """Plain fully-connected stack, softplus on hidden layers, linear output."""

    def __init__(self, sizes, rng: np.random.Generator, dtype=np.float32):
        self.sizes = tuple(sizes)
        self.Ws = []
        self.bs = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.Ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype))
            self.bs.append(np.zeros(fan_out, dtype=dtype))

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.Ws, self.bs):
            out.extend([W, b])
        return out

    def forward(self, x: np.ndarray, want_ctx: bool = False):
        a = x
        ctx = []
        last = len(self.Ws) - 1
        for i, (W, b) in enumerate(zip(self.Ws, self.bs)):
            z = a @ W.T.astype(a.dtype) + b.astype(a.dtype)
            if i < last:
                a_next = softplus(z)
                if want_ctx:
                    ctx.append((a, z))
                a = a_next
            else:
                if want_ctx:
                    ctx.append((a, z))
                a = z
        return (a, ctx) if want_ctx else a

    def backward(self, ctx, grad_out: np.ndarray):
        """Returns (grad_input, [dW1, db1, dW2, db2, ...])."""
        grads: list[np.ndarray] = [None] * (2 * len(self.Ws))
        dz = grad_out
        for i in range(len(self.Ws) - 1, -1, -1):
            a_prev, z = ctx[i]
            if i < len(self.Ws) - 1:
                dz = dz * sigmoid(z)
            grads[2 * i] = dz.reshape(-1, dz.shape[-1]).T @ a_prev.reshape(-1, a_prev.shape[-1])
            grads[2 * i + 1] = dz.reshape(-1, dz.shape[-1]).sum(axis=0)
            if i > 0:
                dz = dz @ self.Ws[i].astype(dz.dtype)
        grad_in = dz @ self.Ws[0].astype(dz.dtype)
        return grad_in, grads

    def input_jacobian(self, ctx) -> np.ndarray:
        """Batched Jacobian d(out)/d(in), shape (B, out_dim, in_dim)."""
        a0, _ = ctx[0]
        dtype = a0.dtype
        T = np.broadcast_to(self.Ws[0].astype(dtype), (a0.shape[0],) + self.Ws[0].shape)
        for i in range(1, len(self.Ws)):
            _, z = ctx[i - 1]
            D = sigmoid(z)[..., None]
            T = np.matmul(self.Ws[i].astype(dtype), D * T)
        return T


class UvMapper:
    """Forward map phi (3D -> sphere -> chart) and inverse map phi^-1.

    ``center``/``scale``/``pre_rotation`` normalize scene coordinates into
    the box the networks were trained on; the inverse network predicts
    normalized coordinates that are mapped back to world space.
    """

    def __init__(self, rng: np.random.Generator | None = None,
                 grid_levels=(16, 32, 64, 128), grid_features: int = 4):
        rng = rng or np.random.default_rng(0)
        self.fwd = Mlp((3, HIDDEN, HIDDEN, HIDDEN, 3), rng)
        self.grid = GridEncoding(grid_levels, grid_features, rng)
        self.inv = Mlp((3 + self.grid.out_dim, HIDDEN, HIDDEN, HIDDEN, 3), rng)
        self.center = np.zeros(3, dtype=np.float64)
        self.scale = 1.0
        self.pre_rotation = np.eye(3, dtype=np.float64)

    # -- coordinate normalization -------------------------------------------------

    def set_normalization(self, center, scale, pre_rotation=None) -> None:
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        self.scale = float(scale)
        if pre_rotation is not None:
            self.pre_rotation = np.asarray(pre_rotation, dtype=np.float64).reshape(3, 3)

    def normalize_points(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return (x - self.center) @ self.pre_rotation.T / self.scale

    def denormalize_points(self, xn: np.ndarray) -> np.ndarray:
        return np.asarray(xn, dtype=np.float64) * self.scale @ self.pre_rotation + self.center

    # -- forward map ---------------------------------------------------------------

    def forward_sphere(self, x: np.ndarray) -> np.ndarray:
        y = self.fwd.forward(self.normalize_points(x))
        return sphere_head(y)

    def forward_uv(self, x: np.ndarray) -> np.ndarray:
        return sphere_to_uv(self.forward_sphere(x))

    def jacobian_uv(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Analytic d(u,v)/dx, shape (B, 2, 3), plus the pole flags."""
        xn = self.normalize_points(np.atleast_2d(x))
        y, ctx = self.fwd.forward(xn, want_ctx=True)
        p = sphere_head(y)
        Jc, pole = chart_jacobian(p)
        H = sphere_head_jacobian(y)
        Jm = self.fwd.input_jacobian(ctx)
        J = Jc @ H @ Jm @ (self.pre_rotation / self.scale)
        return J, pole

    # -- inverse map ---------------------------------------------------------------

    def inverse_from_sphere(self, p: np.ndarray) -> np.ndarray:
        uv = sphere_to_uv(p)
        enc, _ = self.grid.forward(uv)
        xin = np.concatenate([np.asarray(p, dtype=np.float64), enc.astype(np.float64)], axis=-1)
        return self.denormalize_points(self.inv.forward(xin))

    def inverse_point(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        p = uv_to_sphere(uv)
        enc, _ = self.grid.forward(uv)
        xin = np.concatenate([p, enc.astype(np.float64)], axis=-1)
        return self.denormalize_points(self.inv.forward(xin))

    def cache_scene_uv(self, scene) -> None:
        """Refresh the per-Gaussian (uv, Jacobian) cache used by Taylor UV."""
        uv = self.forward_uv(scene.positions)
        J, pole = self.jacobian_uv(scene.positions)
        scene.set_uv_cache(uv, J, pole)

    # -- persistence -----------------------------------------------------------------

    def _arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for tag, mlp in (("fwd", self.fwd), ("inv", self.inv)):
            for i, (W, b) in enumerate(zip(mlp.Ws, mlp.bs)):
                out.append((f"{tag}.W{i}", W))
                out.append((f"{tag}.b{i}", b))
        for i, plane in enumerate(self.grid.planes):
            out.append((f"grid.{i}", plane))
        return out

    def save(self, path) -> None:
        arrays = self._arrays()
        header = {
            "kind": "texsplat-uv-mapper",
            "hidden": HIDDEN,
            "fwd_sizes": list(self.fwd.sizes),
            "inv_sizes": list(self.inv.sizes),
            "grid": self.grid.state_dict(),
            "normalization": {
                "center": self.center.tolist(),
                "scale": self.scale,
                "pre_rotation": self.pre_rotation.reshape(-1).tolist(),
            },
            "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(CKPT_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            for _, a in arrays:
                f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "UvMapper":
        raw = Path(path).read_bytes()
        if raw[:4] != CKPT_MAGIC:
            raise ValueError(f"{path}: not a UV-mapper checkpoint")
        (hlen,) = struct.unpack("<I", raw[4:8])
        header = json.loads(raw[8:8 + hlen].decode())
        grid_cfg = header["grid"]
        m = cls(rng=np.random.default_rng(0), grid_levels=grid_cfg["levels"],
                grid_features=grid_cfg["features"])
        norm = header["normalization"]
        m.set_normalization(norm["center"], norm["scale"],
                            np.asarray(norm["pre_rotation"]).reshape(3, 3))
        offset = 8 + hlen
        arrays = m._arrays()
        names = {n: a for n, a in arrays}
        for meta in header["arrays"]:
            shape = tuple(meta["shape"])
            count = int(np.prod(shape))
            vals = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
            offset += 4 * count
            target = names[meta["name"]]
            if target.shape != shape:
                raise ValueError(f"{path}: shape mismatch for {meta['name']}")
            target[...] = vals
        return m


class AffineUvMap:
    """Diagnostics double: uv = (A x + b)[:2] with an identity chart.

    First-order expansions are exact for this map, which pins down the
    Taylor-UV plumbing in tests.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = np.asarray(A, dtype=np.float64).reshape(3, 3)
        self.b = np.asarray(b, dtype=np.float64).reshape(3)

    def forward_uv(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) @ self.A.T + self.b)[..., :2]

    def jacobian_uv(self, x: np.ndarray):
        x = np.atleast_2d(x)
        J = np.broadcast_to(self.A[:2], (x.shape[0], 2, 3)).copy()
        return J, np.zeros(x.shape[0], dtype=bool)

    def cache_scene_uv(self, scene) -> None:
        uv = self.forward_uv(scene.positions)
        J, pole = self.jacobian_uv(scene.positions)
        scene.set_uv_cache(uv, J, pole)
