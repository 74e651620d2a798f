"""Fused elementwise/scatter kernels for the UV training hot loop."""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def softplus_inplace(z, out):
    n = z.size
    zf = z.reshape(n)
    of = out.reshape(n)
    for i in prange(n):
        x = zf[i]
        a = x if x > 0.0 else 0.0
        of[i] = a + math.log1p(math.exp(-abs(x)))


@njit(cache=True, parallel=True)
def sigmoid_mul_inplace(dz, z):
    """dz *= sigmoid(z), fused."""
    n = z.size
    zf = z.reshape(n)
    df = dz.reshape(n)
    for i in prange(n):
        x = zf[i]
        if x >= 0.0:
            s = 1.0 / (1.0 + math.exp(-x))
        else:
            e = math.exp(x)
            s = e / (1.0 + e)
        df[i] = df[i] * s


@njit(cache=True)
def grid_forward_level(plane, us, vs, out, off, corners, fracs):
    res = plane.shape[0]
    F = plane.shape[2]
    B = us.shape[0]
    for b in range(B):
        u = us[b] % 1.0
        v = vs[b]
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        x = u * res - 0.5
        y = v * (res - 1)
        x0 = int(math.floor(x))
        y0 = int(math.floor(y))
        tx = x - x0
        ty = y - y0
        c0 = x0 % res
        if c0 < 0:
            c0 += res
        c1 = c0 + 1
        if c1 == res:
            c1 = 0
        r0 = min(max(y0, 0), res - 1)
        r1 = min(max(y0 + 1, 0), res - 1)
        corners[b, 0] = c0
        corners[b, 1] = c1
        corners[b, 2] = r0
        corners[b, 3] = r1
        fracs[b, 0] = tx
        fracs[b, 1] = ty
        w00 = (1.0 - tx) * (1.0 - ty)
        w01 = tx * (1.0 - ty)
        w10 = (1.0 - tx) * ty
        w11 = tx * ty
        for f in range(F):
            out[b, off + f] = (w00 * plane[r0, c0, f] + w01 * plane[r0, c1, f] +
                               w10 * plane[r1, c0, f] + w11 * plane[r1, c1, f])


@njit(cache=True)
def grid_backward_level(plane, grad_plane, grad_out, off, corners, fracs, grad_uv):
    res = plane.shape[0]
    F = plane.shape[2]
    B = corners.shape[0]
    for b in range(B):
        c0 = corners[b, 0]
        c1 = corners[b, 1]
        r0 = corners[b, 2]
        r1 = corners[b, 3]
        tx = fracs[b, 0]
        ty = fracs[b, 1]
        w00 = (1.0 - tx) * (1.0 - ty)
        w01 = tx * (1.0 - ty)
        w10 = (1.0 - tx) * ty
        w11 = tx * ty
        du = 0.0
        dv = 0.0
        for f in range(F):
            g = grad_out[b, off + f]
            grad_plane[r0, c0, f] += w00 * g
            grad_plane[r0, c1, f] += w01 * g
            grad_plane[r1, c0, f] += w10 * g
            grad_plane[r1, c1, f] += w11 * g
            du += ((1.0 - ty) * (plane[r0, c1, f] - plane[r0, c0, f]) +
                   ty * (plane[r1, c1, f] - plane[r1, c0, f])) * g
            dv += ((1.0 - tx) * (plane[r1, c0, f] - plane[r0, c0, f]) +
                   tx * (plane[r1, c1, f] - plane[r0, c1, f])) * g
        grad_uv[b, 0] += du * res
        grad_uv[b, 1] += dv * (res - 1)
