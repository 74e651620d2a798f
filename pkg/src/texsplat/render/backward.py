"""Analytic backward pass of the tile rasterizer.

The kernel accumulates pixel-space gradients (2D means, conics, opacities,
intersection chains); this module pulls them back through the EWA
projection, the covariance construction and the quaternion normalization to
the raw scene parameters.  The cached ``uv_mu``/``jac_mu`` are treated as
constants with respect to the centers: they are refreshed from the frozen
UV MLP between optimizer steps, not differentiated through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..scene import Camera, GaussianSet, covariance, normalize_quats
from ..texture import Texture
from . import kernels
from .common import MODE_PREFETCH, MODE_TEXTURED, mode_id, prepare_frame
from .forward import _DUMMY_RGB, _DUMMY_TEX, RenderOutput


@dataclass
class PixelGrads:
    """Upstream per-pixel loss gradients feeding the backward pass."""

    color: np.ndarray
    depth: np.ndarray | None = None
    normal: np.ndarray | None = None
    alpha: np.ndarray | None = None
    color_nosh: np.ndarray | None = None

    def dense(self, H: int, W: int):
        z2 = lambda a, shape: np.zeros(shape) if a is None else np.asarray(a, dtype=np.float64)
        return (np.ascontiguousarray(np.asarray(self.color, dtype=np.float64)),
                z2(self.color_nosh, (H, W, 3)), z2(self.depth, (H, W)),
                z2(self.normal, (H, W, 3)), z2(self.alpha, (H, W)))


@dataclass
class RenderGradients:
    texture: np.ndarray          # (Ht, Wt, 3)
    sh: np.ndarray               # (N, 16, 3)
    opacity_logits: np.ndarray   # (N,)
    positions: np.ndarray        # (N, 3)
    quats: np.ndarray            # (N, 4)
    log_scales: np.ndarray       # (N, 3)


def quat_rotmat_vjp(q_raw: np.ndarray, dR: np.ndarray) -> np.ndarray:
    """Pull a rotation-matrix gradient back to the raw (unnormalized) quaternion."""
    qh = normalize_quats(np.asarray(q_raw, dtype=np.float64))
    w, x, y, z = qh[..., 0], qh[..., 1], qh[..., 2], qh[..., 3]
    r = lambda i, j: dR[..., i, j]
    dw = 2.0 * (-z * r(0, 1) + y * r(0, 2) + z * r(1, 0) - x * r(1, 2)
                - y * r(2, 0) + x * r(2, 1))
    dx = 2.0 * (y * r(0, 1) + z * r(0, 2) + y * r(1, 0) - 2.0 * x * r(1, 1)
                - w * r(1, 2) + z * r(2, 0) + w * r(2, 1) - 2.0 * x * r(2, 2))
    dy = 2.0 * (-2.0 * y * r(0, 0) + x * r(0, 1) + w * r(0, 2) + x * r(1, 0)
                + z * r(1, 2) - w * r(2, 0) + z * r(2, 1) - 2.0 * y * r(2, 2))
    dz = 2.0 * (-2.0 * z * r(0, 0) - w * r(0, 1) + x * r(0, 2) + w * r(1, 0)
                - 2.0 * z * r(1, 1) + y * r(1, 2) + x * r(2, 0) + y * r(2, 1))
    dqh = np.stack([dw, dx, dy, dz], axis=-1)
    norm = np.linalg.norm(np.asarray(q_raw, dtype=np.float64), axis=-1, keepdims=True)
    proj = dqh - qh * np.sum(qh * dqh, axis=-1, keepdims=True)
    return proj / norm


def render_backward(scene: GaussianSet, cam: Camera, texture: Texture | None,
                    mode: str, upstream: PixelGrads, forward_out: RenderOutput,
                    want_geometry: bool = True) -> RenderGradients:
    mid = mode_id(mode)
    if mode_id(forward_out.mode) != mid:
        raise ValueError(
            f"backward mode {mode!r} does not match forward output mode {forward_out.mode!r}")
    prep = prepare_frame(scene, cam, mid)
    H, W = cam.height, cam.width
    M = len(prep.proj.indices)
    N = len(scene)

    g_color, g_nosh, g_depth, g_normal, g_alpha = upstream.dense(H, W)

    if mid == MODE_PREFETCH:
        prefetch_rgb = np.ascontiguousarray(texture.sample_bilinear(prep.uv_mu))
    else:
        prefetch_rgb = _DUMMY_RGB
    tex = texture.data if texture is not None else _DUMMY_TEX
    Ht, Wt = tex.shape[0], tex.shape[1]

    nchunk = kernels.N_CHUNKS
    gb_mean2d = np.zeros((nchunk, M, 2))
    gb_conic = np.zeros((nchunk, M, 3))
    gb_opac = np.zeros((nchunk, M))
    gb_sh = np.zeros((nchunk, M, 16, 3))
    gb_mu = np.zeros((nchunk, M, 3))
    gb_rot = np.zeros((nchunk, M, 3, 3))
    gb_sclamp = np.zeros((nchunk, M, 3))
    gb_nvec = np.zeros((nchunk, M, 3))
    gb_depth = np.zeros((nchunk, M))
    gb_prefetch = np.zeros((nchunk, M, 3))
    gb_tex = np.zeros((nchunk, Ht, Wt, 3))

    if M > 0:
        kernels.backward_kernel(
            prep.tile_start, prep.tile_end, prep.pair_gauss, prep.ntx, W, H, mid,
            prep.proj.mean2d, prep.conic_packed, prep.proj.depth, prep.opacity,
            prep.sh, prefetch_rgb, prep.normals, prep.mu, prep.rot, prep.bound,
            prep.uv_mu, prep.jac_mu, tex,
            cam.fx, cam.fy, cam.cx, cam.cy, cam.R, cam.origin,
            forward_out.final_T, forward_out.n_contrib,
            g_color, g_nosh, g_depth, g_normal, g_alpha,
            want_geometry,
            gb_mean2d, gb_conic, gb_opac, gb_sh, gb_mu, gb_rot,
            gb_sclamp, gb_nvec, gb_depth, gb_prefetch, gb_tex)

    d_tex = gb_tex.sum(axis=0)
    d_sh_k = gb_sh.sum(axis=0)
    d_opac_k = gb_opac.sum(axis=0)

    grads = RenderGradients(
        texture=d_tex,
        sh=np.zeros((N, 16, 3)),
        opacity_logits=np.zeros(N),
        positions=np.zeros((N, 3)),
        quats=np.zeros((N, 4)),
        log_scales=np.zeros((N, 3)),
    )

    keep = prep.proj.indices
    if M == 0:
        return grads

    if mid == MODE_PREFETCH:
        d_rgb = gb_prefetch.sum(axis=0)
        _, d_tex = texture.sample_bilinear_adjoint(prep.uv_mu, d_rgb, grads.texture)
        grads.texture = d_tex

    o = prep.opacity
    grads.sh[keep] = d_sh_k
    grads.opacity_logits[keep] = d_opac_k * o * (1.0 - o)

    if not want_geometry:
        return grads

    # pull 2D-space gradients back through the EWA projection
    gm = gb_mean2d.sum(axis=0)
    gc = gb_conic.sum(axis=0)
    gdep = gb_depth.sum(axis=0)
    d_mu = gb_mu.sum(axis=0)
    d_rot = gb_rot.sum(axis=0)
    d_s = gb_sclamp.sum(axis=0)
    d_nvec = gb_nvec.sum(axis=0)

    mu = prep.mu
    quats = scene.quats[keep]
    log_s = scene.log_scales[keep]
    tc = cam.world_to_cam(mu)
    tx, ty, tz = tc[:, 0], tc[:, 1], tc[:, 2]

    lam = np.empty((M, 2, 2))
    lam[:, 0, 0] = prep.conic_packed[:, 0]
    lam[:, 0, 1] = lam[:, 1, 0] = prep.conic_packed[:, 1]
    lam[:, 1, 1] = prep.conic_packed[:, 2]
    G2 = np.empty((M, 2, 2))
    G2[:, 0, 0] = gc[:, 0]
    G2[:, 0, 1] = G2[:, 1, 0] = 0.5 * gc[:, 1]
    G2[:, 1, 1] = gc[:, 2]
    d_cov2d = -lam @ G2 @ lam

    J = np.zeros((M, 2, 3))
    J[:, 0, 0] = cam.fx / tz
    J[:, 0, 2] = -cam.fx * tx / tz ** 2
    J[:, 1, 1] = cam.fy / tz
    J[:, 1, 2] = -cam.fy * ty / tz ** 2
    Sigma = covariance(quats, log_s)
    Mj = J @ cam.R
    d_M = 2.0 * d_cov2d @ Mj @ Sigma
    d_Sigma = Mj.transpose(0, 2, 1) @ d_cov2d @ Mj
    d_J = d_M @ cam.R.T

    dtx = d_J[:, 0, 2] * (-cam.fx / tz ** 2) + gm[:, 0] * cam.fx / tz
    dty = d_J[:, 1, 2] * (-cam.fy / tz ** 2) + gm[:, 1] * cam.fy / tz
    dtz = (d_J[:, 0, 0] * (-cam.fx / tz ** 2) + d_J[:, 0, 2] * (2.0 * cam.fx * tx / tz ** 3)
           + d_J[:, 1, 1] * (-cam.fy / tz ** 2) + d_J[:, 1, 2] * (2.0 * cam.fy * ty / tz ** 3)
           + gm[:, 0] * (-cam.fx * tx / tz ** 2) + gm[:, 1] * (-cam.fy * ty / tz ** 2)
           + gdep)
    d_mu = d_mu + np.stack([dtx, dty, dtz], axis=-1) @ cam.R

    # covariance chain
    E = np.exp(2.0 * log_s)
    R = prep.rot
    d_rot = d_rot + 2.0 * (d_Sigma @ R) * E[:, None, :]
    d_s = d_s + 2.0 * E * np.einsum("mji,mjk,mki->mi", R, d_Sigma, R)

    # oriented-normal column of R
    k_idx = np.argmin(log_s, axis=-1)
    v = np.take_along_axis(R, k_idx[:, None, None], axis=-1)[..., 0]
    sign = np.where(np.sum(v * (mu - cam.origin), axis=-1) < 0.0, 1.0, -1.0)
    col = np.zeros_like(d_rot)
    np.put_along_axis(col, k_idx[:, None, None],
                      (sign[:, None] * d_nvec)[:, :, None], axis=-1)
    d_rot = d_rot + col

    d_q = quat_rotmat_vjp(quats, d_rot)

    grads.positions[keep] = d_mu
    grads.quats[keep] = d_q
    grads.log_scales[keep] = d_s
    return grads
