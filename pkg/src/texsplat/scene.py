"""Gaussian scene representation and screen-space projection.

Conventions used across the package:

* quaternions are stored ``(w, x, y, z)`` and renormalized after every
  optimizer step; rotation matrices are built from the normalized value.
* scales are stored as logs, covariance axes are ``exp(s)``.
* opacity is stored as a logit, ``o = sigmoid(logit)`` keeps it in (0, 1).
* cameras map world points to camera space via ``x_c = R x_w + t`` and the
  continuous image coordinate of pixel ``(i, j)`` is ``(i + 0.5, j + 0.5)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Real SH basis constants in the ordering used by the splatting ecosystem
# (degree 3, 16 coefficients); PLY interop depends on this exact basis.
SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

NEAR_PLANE = 0.01
SCREEN_BLUR = 0.3


class StaleUvCacheError(RuntimeError):
    """Raised when a textured render is requested with an out-of-date UV cache."""


def normalize_quats(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for an (..., 4) array of (w, x, y, z) quaternions.

    The quaternion is normalized internally, so callers may pass raw
    optimizer state.
    """
    q = normalize_quats(np.asarray(q, dtype=np.float64))
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def covariance(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """World-space covariance ``R diag(exp(s))^2 R^T`` for (...,4)/(...,3) inputs."""
    R = quat_to_rotmat(q)
    e = np.exp(2.0 * np.asarray(s, dtype=np.float64))
    return np.einsum("...ij,...j,...kj->...ik", R, e, R)


def shortest_axis(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the smallest covariance axis (lowest index on ties)."""
    R = quat_to_rotmat(q)
    s = np.asarray(s, dtype=np.float64)
    idx = np.argmin(s, axis=-1)  # argmin returns the first minimum
    return np.take_along_axis(R, idx[..., None, None], axis=-1)[..., 0]


def oriented_normal(v: np.ndarray, mu: np.ndarray, cam_origin: np.ndarray) -> np.ndarray:
    """Flip ``v`` so the returned normal satisfies ``n . (mu - o) <= 0``."""
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(mu, dtype=np.float64) - np.asarray(cam_origin, dtype=np.float64)
    dot = np.sum(v * d, axis=-1, keepdims=True)
    return np.where(dot < 0.0, v, -v)


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Degree-3 real SH basis values, shape (..., 16), for unit directions."""
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    B = np.empty(d.shape[:-1] + (16,), dtype=np.float64)
    B[..., 0] = SH_C0
    B[..., 1] = -SH_C1 * y
    B[..., 2] = SH_C1 * z
    B[..., 3] = -SH_C1 * x
    B[..., 4] = SH_C2[0] * xy
    B[..., 5] = SH_C2[1] * yz
    B[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    B[..., 7] = SH_C2[3] * xz
    B[..., 8] = SH_C2[4] * (xx - yy)
    B[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    B[..., 10] = SH_C3[1] * xy * z
    B[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    B[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    B[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    B[..., 14] = SH_C3[5] * z * (xx - yy)
    B[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return B


def eval_sh(coeffs: np.ndarray, view_dir: np.ndarray, mode: str = "residual") -> np.ndarray:
    """Evaluate SH colors.

    ``coeffs`` has shape (..., 16, 3).  ``mode='vanilla'`` adds the +0.5
    offset of the stock splatting convention; ``mode='residual'`` is
    zero-centered (the texture carries the base color).
    """
    B = sh_basis(view_dir)
    out = np.einsum("...k,...kc->...c", B, np.asarray(coeffs, dtype=np.float64))
    if mode == "vanilla":
        out = out + 0.5
    elif mode != "residual":
        raise ValueError(f"unknown SH mode {mode!r}")
    return out


@dataclass
class Camera:
    """Pinhole camera with a world-to-camera pose.

    ``R`` is orthonormal (world->camera), ``t`` the translation of the same
    map; the optical center in world coordinates is ``-R^T t``.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    R: np.ndarray
    t: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not np.allclose(self.R @ self.R.T, np.eye(3), atol=1e-6):
            raise ValueError("camera rotation is not orthonormal")

    @property
    def origin(self) -> np.ndarray:
        return -self.R.T @ self.t

    def world_to_cam(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) @ self.R.T + self.t

    def ray_dirs(self) -> np.ndarray:
        """Unit world-space ray directions through every pixel center, (H, W, 3)."""
        xs = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        ys = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        gx, gy = np.meshgrid(xs, ys)
        d = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
        d = d @ self.R  # == (R^T d_cam^T)^T
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass
class Projected2D:
    """Screen-space footprint of the Gaussians retained for one camera."""

    indices: np.ndarray     # (M,) indices into the scene
    mean2d: np.ndarray      # (M, 2) pixel coordinates
    cov2d: np.ndarray       # (M, 2, 2) includes the low-pass blur term
    conic: np.ndarray       # (M, 2, 2) inverse of cov2d
    depth: np.ndarray       # (M,) camera-space z
    radius: np.ndarray      # (M,) 3 * sqrt(max eigenvalue)


def project_ewa(positions: np.ndarray, q: np.ndarray, s: np.ndarray, cam: Camera) -> Projected2D:
    """EWA projection of all Gaussians in front of the camera.

    ``cov2d = J W Sigma W^T J^T + 0.3 I`` with J the affine approximation of
    the perspective projection at each center; Gaussians with camera-space
    depth below the near plane are culled.
    """
    mu = np.asarray(positions, dtype=np.float64)
    tc = cam.world_to_cam(mu)
    keep = tc[:, 2] > NEAR_PLANE
    idx = np.nonzero(keep)[0]
    tc = tc[keep]
    tx, ty, tz = tc[:, 0], tc[:, 1], tc[:, 2]

    mean2d = np.stack([cam.fx * tx / tz + cam.cx, cam.fy * ty / tz + cam.cy], axis=-1)

    J = np.zeros((len(idx), 2, 3), dtype=np.float64)
    J[:, 0, 0] = cam.fx / tz
    J[:, 0, 2] = -cam.fx * tx / tz ** 2
    J[:, 1, 1] = cam.fy / tz
    J[:, 1, 2] = -cam.fy * ty / tz ** 2

    Sigma = covariance(np.asarray(q)[keep], np.asarray(s)[keep])
    M = J @ cam.R
    cov2d = M @ Sigma @ M.transpose(0, 2, 1)
    cov2d[:, 0, 0] += SCREEN_BLUR
    cov2d[:, 1, 1] += SCREEN_BLUR

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    conic = np.empty_like(cov2d)
    conic[:, 0, 0] = cov2d[:, 1, 1] / det
    conic[:, 1, 1] = cov2d[:, 0, 0] / det
    conic[:, 0, 1] = -cov2d[:, 0, 1] / det
    conic[:, 1, 0] = -cov2d[:, 1, 0] / det

    mid = 0.5 * (cov2d[:, 0, 0] + cov2d[:, 1, 1])
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = 3.0 * np.sqrt(lam_max)

    return Projected2D(indices=idx, mean2d=mean2d, cov2d=cov2d, conic=conic,
                       depth=tz.copy(), radius=radius)


class GaussianSet:
    """Mutable container of Gaussian parameters plus the per-Gaussian UV cache.

    Positions are exposed through a read-only view; any write through
    :meth:`set_positions` (or wholesale parameter replacement) invalidates
    the UV cache so textured renders cannot silently use stale Taylor data.
    """

    def __init__(self, positions, quats, log_scales, opacity_logits, sh):
        self._positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
        n = len(self._positions)
        self.quats = np.array(quats, dtype=np.float64).reshape(n, 4)
        self.log_scales = np.array(log_scales, dtype=np.float64).reshape(n, 3)
        self.opacity_logits = np.array(opacity_logits, dtype=np.float64).reshape(n)
        self.sh = np.array(sh, dtype=np.float64).reshape(n, 16, 3)
        self.uv_mu = np.zeros((n, 2), dtype=np.float64)
        self.jac_mu = np.zeros((n, 2, 3), dtype=np.float64)
        self.uv_pole_flag = np.zeros(n, dtype=bool)
        self.uv_fresh = False

    @classmethod
    def empty(cls, n: int) -> "GaussianSet":
        q = np.zeros((n, 4))
        q[:, 0] = 1.0
        return cls(np.zeros((n, 3)), q, np.zeros((n, 3)), np.zeros(n), np.zeros((n, 16, 3)))

    def __len__(self) -> int:
        return len(self._positions)

    @property
    def positions(self) -> np.ndarray:
        view = self._positions.view()
        view.flags.writeable = False
        return view

    def set_positions(self, value: np.ndarray) -> None:
        self._positions[...] = value
        self.uv_fresh = False

    @property
    def opacities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.opacity_logits))

    def set_uv_cache(self, uv: np.ndarray, jac: np.ndarray, pole_flag: np.ndarray) -> None:
        self.uv_mu[...] = uv
        self.jac_mu[...] = jac
        self.uv_pole_flag[...] = pole_flag
        self.uv_fresh = True

    def require_fresh_uv(self) -> None:
        if not self.uv_fresh:
            raise StaleUvCacheError(
                "textured render requires cache_scene_uv() after the last position change")

    def select(self, mask_or_indices) -> "GaussianSet":
        sub = GaussianSet(self._positions[mask_or_indices], self.quats[mask_or_indices],
                          self.log_scales[mask_or_indices],
                          self.opacity_logits[mask_or_indices], self.sh[mask_or_indices])
        sub.uv_mu = self.uv_mu[mask_or_indices].copy()
        sub.jac_mu = self.jac_mu[mask_or_indices].copy()
        sub.uv_pole_flag = self.uv_pole_flag[mask_or_indices].copy()
        sub.uv_fresh = self.uv_fresh
        return sub

    def copy(self) -> "GaussianSet":
        return self.select(slice(None))


def look_at_camera(eye, target, width: int, height: int, fov_deg: float = 50.0,
                   up=(0.0, 1.0, 0.0)) -> Camera:
    """Camera at ``eye`` looking at ``target`` with a square-pixel pinhole."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - eye
    nz = np.linalg.norm(z)
    if nz < 1e-12:
        raise ValueError("eye and target coincide")
    z = z / nz
    upv = np.asarray(up, dtype=np.float64)
    if abs(upv @ z) > 0.98:
        upv = np.array([1.0, 0.0, 0.0])
    x = np.cross(upv, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=0)
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2.0)
    return Camera(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                  width=width, height=height, R=R, t=-R @ eye)


def orbit_camera(azimuth_deg: float, elevation_deg: float, radius: float,
                 target=(0.0, 0.0, 0.0), width: int = 512, height: int = 512,
                 fov_deg: float = 50.0) -> Camera:
    az = np.radians(azimuth_deg)
    el = np.radians(elevation_deg)
    target = np.asarray(target, dtype=np.float64)
    eye = target + radius * np.array([
        np.cos(el) * np.cos(az), np.sin(el), np.cos(el) * np.sin(az)])
    return look_at_camera(eye, target, width, height, fov_deg)
