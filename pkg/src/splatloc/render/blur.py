"""Separable Gaussian blur with an exact adjoint.

The kernel variance is ``delta * s**2`` where ``s`` is the image diagonal in
pixels, so ``delta`` is a unitless fraction of image scale. Borders use
half-sample reflection (``d c b a | a b c d``). The blur is a fixed linear map
``B_y @ img @ B_x.T`` per channel; its adjoint is ``B_y.T @ g @ B_x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class BlurSpec:
    delta: float = 0.0
    kernel_size: int = 1

    @property
    def is_identity(self) -> bool:
        return self.delta <= 0.0 or self.kernel_size <= 1


NO_BLUR = BlurSpec()


def _odd_clamp(size: int, n: int) -> int:
    size = min(int(size), n)
    if size % 2 == 0:
        size -= 1
    return max(size, 1)


def gaussian_taps(kernel_size: int, sigma: float) -> np.ndarray:
    h = kernel_size // 2
    k = np.arange(-h, h + 1, dtype=np.float64)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


@lru_cache(maxsize=64)
def blur_matrix(n: int, kernel_size: int, sigma: float) -> np.ndarray:
    """n x n matrix applying the 1D kernel along one axis."""
    L = _odd_clamp(kernel_size, n)
    taps = gaussian_taps(L, sigma)
    h = L // 2
    cols = np.arange(n)[:, None] + np.arange(-h, h + 1)[None, :]
    cols = np.where(cols < 0, -cols - 1, cols)
    cols = np.where(cols >= n, 2 * n - cols - 1, cols)  # h <= (n - 1) / 2: one bounce suffices
    rows = np.broadcast_to(np.arange(n)[:, None], cols.shape)
    B = np.zeros((n, n))
    np.add.at(B, (rows, cols), np.broadcast_to(taps, cols.shape))
    B.setflags(write=False)
    return B


def _matrices(shape, spec: BlurSpec):
    h, w = shape[:2]
    sigma = float(np.sqrt(spec.delta) * np.hypot(h, w))
    return blur_matrix(h, spec.kernel_size, sigma), blur_matrix(w, spec.kernel_size, sigma)


def blur(img: np.ndarray, spec: BlurSpec) -> np.ndarray:
    if spec.is_identity:
        return img
    By, Bx = _matrices(img.shape, spec)
    h, w, c = img.shape
    return (By @ (Bx @ img).reshape(h, w * c)).reshape(h, w, c)


def blur_adjoint(grad: np.ndarray, spec: BlurSpec) -> np.ndarray:
    if spec.is_identity:
        return grad
    By, Bx = _matrices(grad.shape, spec)
    h, w, c = grad.shape
    return (By.T @ (Bx.T @ grad).reshape(h, w * c)).reshape(h, w, c)
