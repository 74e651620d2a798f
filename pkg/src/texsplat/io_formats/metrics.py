"""Image quality metrics."""

from __future__ import annotations

import numpy as np

PSNR_CAP = 99.0


def psnr(img: np.ndarray, gt: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1].

    ``mask`` restricts the MSE to foreground pixels; identical images report
    the cap (99 dB).
    """
    img = np.asarray(img, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if img.shape != gt.shape:
        raise ValueError(f"shape mismatch: {img.shape} vs {gt.shape}")
    se = (img - gt) ** 2
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if not m.any():
            raise ValueError("psnr: empty mask")
        se = se[m]
    mse = float(se.mean())
    if mse <= 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP)


def l1_metric(img: np.ndarray, gt: np.ndarray, mask: np.ndarray | None = None) -> float:
    img = np.asarray(img, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    ae = np.abs(img - gt)
    if mask is not None:
        ae = ae[np.asarray(mask, dtype=bool)]
    return float(ae.mean())
