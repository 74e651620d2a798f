"""Photometric and regularization losses with analytic gradients.

SSIM uses an 11-tap Gaussian window (sigma 1.5, k1=0.01, k2=0.03) on
zero-padded filtered moments with the 5-pixel border excluded from the
mean; interior values are then independent of the padding mode, and the
symmetric zero-padded filter is self-adjoint, which keeps the gradient
exact.  Losses are evaluated on unclamped rendered colors; clamping happens
only when images are written out.
"""

from __future__ import annotations

import numpy as np

try:
    import cv2

    cv2.setNumThreads(0)  # render kernels own the thread pool
except ImportError:  # pragma: no cover
    cv2 = None
from scipy.ndimage import correlate1d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_PAD = SSIM_WINDOW // 2

OPACITY_EPS = 1e-4


def _ssim_kernel() -> np.ndarray:
    r = _PAD
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return k / k.sum()

_KERNEL = _ssim_kernel()


def _filt(img: np.ndarray) -> np.ndarray:
    if cv2 is not None:
        return cv2.sepFilter2D(img, -1, _KERNEL, _KERNEL,
                               borderType=cv2.BORDER_CONSTANT)
    out = correlate1d(img, _KERNEL, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, _KERNEL, axis=1, mode="constant", cval=0.0)


def _check_shapes(img, gt):
    if img.shape != gt.shape:
        raise ValueError(f"shape mismatch: {img.shape} vs {gt.shape}")


def l1_loss(img: np.ndarray, gt: np.ndarray):
    """Mean absolute error and its gradient w.r.t. ``img``."""
    img = np.asarray(img, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_shapes(img, gt)
    diff = img - gt
    return np.abs(diff).mean(), np.sign(diff) / diff.size


def d_ssim(img: np.ndarray, gt: np.ndarray, dtype=np.float32):
    """D-SSIM = (1 - SSIM)/2 over the interior, with gradient w.r.t. ``img``.

    Filtered moments run in float32 by default (the window mean bounds the
    rounding error well below 1e-5); pass ``dtype=np.float64`` for oracle
    comparisons.
    """
    x = np.asarray(img, dtype=dtype)
    y = np.asarray(gt, dtype=dtype)
    _check_shapes(x, y)
    if x.ndim == 2:
        x = x[..., None]
        y = y[..., None]
        squeeze = True
    else:
        squeeze = False

    C1 = SSIM_K1 ** 2
    C2 = SSIM_K2 ** 2
    ux = _filt(x)
    uy = _filt(y)
    mxx = _filt(x * x)
    myy = _filt(y * y)
    mxy = _filt(x * y)
    sxx = mxx - ux * ux
    syy = myy - uy * uy
    sxy = mxy - ux * uy
    A1 = 2.0 * ux * uy + C1
    A2 = 2.0 * sxy + C2
    B1 = ux * ux + uy * uy + C1
    B2 = sxx + syy + C2
    S = (A1 * A2) / (B1 * B2)

    interior = S[_PAD:-_PAD, _PAD:-_PAD, :]
    value = float((1.0 - interior).mean() / 2.0)

    gS = np.zeros_like(S)
    gS[_PAD:-_PAD, _PAD:-_PAD, :] = dtype(-0.5 / interior.size)

    inv = 1.0 / (B1 * B2)
    d_A1 = gS * A2 * inv
    d_A2 = gS * A1 * inv
    d_B1 = -gS * S / B1
    d_B2 = -gS * S / B2
    d_ux = 2.0 * uy * d_A1 + 2.0 * ux * d_B1 - uy * 2.0 * d_A2 - 2.0 * ux * d_B2
    d_mxy = 2.0 * d_A2
    d_mxx = d_B2
    grad = (_filt(d_ux) + 2.0 * x * _filt(d_mxx) + y * _filt(d_mxy)).astype(np.float64)
    if squeeze:
        grad = grad[..., 0]
    return value, grad


def mask_loss(alpha: np.ndarray, mask: np.ndarray):
    """L1 between accumulated opacity and the binary foreground mask."""
    alpha = np.asarray(alpha, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    _check_shapes(alpha, mask)
    diff = alpha - mask
    return np.abs(diff).mean(), np.sign(diff) / diff.size


def l01(opacity_logits: np.ndarray):
    """Zero-one opacity regularizer ``mean(ln o + ln(1 - o))``.

    Minimizing pushes opacities toward {0, 1}; the value is clamped at
    [1e-4, 1 - 1e-4] to stay bounded.  Returns the value and the gradient
    w.r.t. the logits.
    """
    logits = np.asarray(opacity_logits, dtype=np.float64)
    o = 1.0 / (1.0 + np.exp(-logits))
    oc = np.clip(o, OPACITY_EPS, 1.0 - OPACITY_EPS)
    value = float(np.mean(np.log(oc) + np.log1p(-oc)))
    inside = (o > OPACITY_EPS) & (o < 1.0 - OPACITY_EPS)
    d_o = np.where(inside, 1.0 / oc - 1.0 / (1.0 - oc), 0.0) / logits.size
    return value, d_o * o * (1.0 - o)


def normal_loss(normal: np.ndarray, normal_gt: np.ndarray):
    """Squared error of the blended normal map, summed over components / (H W)."""
    n = np.asarray(normal, dtype=np.float64)
    g = np.asarray(normal_gt, dtype=np.float64)
    _check_shapes(n, g)
    hw = n.shape[0] * n.shape[1]
    diff = n - g
    return float(np.sum(diff * diff) / hw), 2.0 * diff / hw


def smoothness_weights(color_gt: np.ndarray, gamma: float):
    """Per-edge weights ``exp(-gamma |C(p)-C(q)|_1)``; cacheable per view."""
    c = np.asarray(color_gt, dtype=np.float64)
    return tuple(np.exp(-gamma * np.abs(np.diff(c, axis=axis)).sum(axis=-1))
                 for axis in (0, 1))


def smoothness_loss(normal: np.ndarray, color_gt: np.ndarray, gamma: float,
                    weights=None):
    """Edge-aware total variation of the normal map over the 4-neighborhood.

    Every ordered neighbor pair contributes
    ``exp(-gamma |C(p)-C(q)|_1) |N(p)-N(q)|_1``; the color weights are
    symmetric so the gradient doubles each unordered edge.
    """
    n = np.asarray(normal, dtype=np.float64)
    if weights is None:
        if n.shape[:2] != np.asarray(color_gt).shape[:2]:
            raise ValueError("normal/color shapes disagree")
        weights = smoothness_weights(color_gt, gamma)
    hw = n.shape[0] * n.shape[1]
    value = 0.0
    grad = np.zeros_like(n)
    for axis in (0, 1):
        dn = np.diff(n, axis=axis)
        w = weights[axis]
        value += 2.0 * float(np.sum(w * np.abs(dn).sum(axis=-1)))
        g = 2.0 * w[..., None] * np.sign(dn)
        if axis == 0:
            grad[1:, :] += g
            grad[:-1, :] -= g
        else:
            grad[:, 1:] += g
            grad[:, :-1] -= g
    return value / hw, grad / hw


def psnr_from_mse(mse: float) -> float:
    if mse <= 0:
        return 99.0
    return min(10.0 * np.log10(1.0 / mse), 99.0)


def total_loss(out, gt_image: np.ndarray, gt_mask: np.ndarray | None,
               gt_normal: np.ndarray | None, opacity_logits: np.ndarray,
               cfg, include_reg: bool = True, include_nosh: bool = True,
               smooth_weights=None):
    """Compose the training loss and route its gradients.

    ``out`` is a RenderOutput; when it carries a texture-only color image the
    no-SH photometric terms are computed on it, otherwise (pre-fetch mode,
    which has no SH at all) they fall back to the main color.  Returns
    ``(value, parts, PixelGrads, d_opacity_logits)``.
    """
    from .render.backward import PixelGrads

    parts = {}
    v_l1, g_l1 = l1_loss(out.color, gt_image)
    v_ss, g_ss = d_ssim(out.color, gt_image)
    parts["l1"] = v_l1
    parts["ssim"] = v_ss
    g_color = g_l1 + cfg.lambda_ssim * g_ss
    value = v_l1 + cfg.lambda_ssim * v_ss

    g_alpha = None
    if gt_mask is not None:
        v_m, g_m = mask_loss(out.alpha, gt_mask)
        parts["mask"] = v_m
        value += v_m
        g_alpha = g_m

    d_logits = np.zeros_like(np.asarray(opacity_logits, dtype=np.float64))
    g_normal = None
    if include_reg:
        v_01, g_01 = l01(opacity_logits)
        parts["l01"] = v_01
        value += cfg.lambda_01 * v_01
        d_logits = cfg.lambda_01 * g_01
        if gt_normal is not None:
            v_n, g_n = normal_loss(out.normal, gt_normal)
            v_s, g_s = smoothness_loss(out.normal, gt_image, cfg.gamma,
                                       weights=smooth_weights)
            parts["normal"] = v_n
            parts["smooth"] = v_s
            value += cfg.lambda_n * (v_n + v_s)
            g_normal = cfg.lambda_n * (g_n + g_s)

    g_nosh = None
    if include_nosh and cfg.lambda_nosh > 0.0:
        nosh_img = out.color_nosh if out.color_nosh is not None else out.color
        v_l1n, g_l1n = l1_loss(nosh_img, gt_image)
        v_ssn, g_ssn = d_ssim(nosh_img, gt_image)
        parts["l1_nosh"] = v_l1n
        parts["ssim_nosh"] = v_ssn
        value += cfg.lambda_nosh * (v_l1n + cfg.lambda_ssim * v_ssn)
        gn = cfg.lambda_nosh * (g_l1n + cfg.lambda_ssim * g_ssn)
        if out.color_nosh is not None:
            g_nosh = gn
        else:
            g_color = g_color + gn

    grads = PixelGrads(color=g_color, depth=None, normal=g_normal,
                       alpha=g_alpha, color_nosh=g_nosh)
    return float(value), parts, grads, d_logits
