"""Image files.

Images are held in linear light. PNG files are 8-bit sRGB: values are
clamped to [0, 1], sRGB-encoded on write and decoded back to linear on read.
PFM files hold raw float32 samples (little-endian, rows stored bottom-up as
the format requires), so a float32 image round-trips exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1 / 2.4) - 0.055)


def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    return np.where(x <= 0.04045, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))


def write_png(path, img: np.ndarray) -> None:
    q = np.round(linear_to_srgb(np.asarray(img, dtype=np.float64)) * 255.0).astype(np.uint8)
    Image.fromarray(q, mode="RGB").save(path)


def read_png(path) -> np.ndarray:
    q = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
    return srgb_to_linear(q)


def write_pfm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype="<f4")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"PF":
        raise ValueError("only colour PFM files are supported")
    w, h = (int(v) for v in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    img = np.frombuffer(parts[3], dtype=dtype, count=w * h * 3).reshape(h, w, 3)
    return img[::-1].astype(np.float32)
