"""Image and texture persistence: 8-bit sRGB PNG and raw float32 blobs."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

BLOB_MAGIC = b"TEXF"


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(encoded, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.04045, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))


def save_png(linear_rgb: np.ndarray, path) -> None:
    u8 = np.round(srgb_encode(linear_rgb) * 255.0).astype(np.uint8)
    if u8.ndim == 2:
        Image.fromarray(u8, mode="L").save(path)
    else:
        Image.fromarray(u8, mode="RGB").save(path)


def load_png(path) -> np.ndarray:
    """Load a PNG as linear float32 RGB in [0, 1]."""
    img = Image.open(path)
    img = img.convert("RGB")
    u8 = np.asarray(img, dtype=np.float64) / 255.0
    return srgb_decode(u8).astype(np.float32)


def png_bytes(linear_rgb: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    u8 = np.round(srgb_encode(linear_rgb) * 255.0).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_png_bytes(data: bytes) -> np.ndarray:
    import io

    img = Image.open(io.BytesIO(data)).convert("RGB")
    u8 = np.asarray(img, dtype=np.float64) / 255.0
    return srgb_decode(u8).astype(np.float32)


def save_mask_png(mask: np.ndarray, path) -> None:
    Image.fromarray((np.asarray(mask) > 0.5).astype(np.uint8) * 255, mode="L").save(path)


def load_mask_png(path) -> np.ndarray:
    return (np.asarray(Image.open(path).convert("L"), dtype=np.float64) / 255.0 > 0.5)


def save_texture_blob(data: np.ndarray, path) -> None:
    """Lossless float32 texture checkpoint: magic, (H, W, C) header, LE data."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError("texture blob expects (H, W, C)")
    with open(path, "wb") as f:
        f.write(BLOB_MAGIC)
        f.write(struct.pack("<III", *arr.shape))
        f.write(arr.tobytes())


def load_texture_blob(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != BLOB_MAGIC:
        raise ValueError(f"{path}: not a texture blob")
    h, w, c = struct.unpack("<III", raw[4:16])
    count = h * w * c
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=16)
    if data.size != count:
        raise ValueError(f"{path}: truncated texture blob")
    return data.reshape(h, w, c).copy()
