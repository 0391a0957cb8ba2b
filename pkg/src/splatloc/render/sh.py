"""Real spherical harmonics up to degree 2 and their direction derivatives.

Basis ordering follows the usual (l, m) order with m = -l..l and the
Condon-Shortley phase, which gives the familiar signs ``-C1 y, +C1 z, -C1 x``
for degree one. Colors are offset by 0.5 so that zero coefficients render
mid-grey.
"""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
COLOR_OFFSET = 0.5


def sh_basis(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Basis values for unit directions (N, 3) -> (N, (degree+1)^2)."""
    dirs = np.atleast_2d(dirs)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    out = [np.full(len(dirs), C0)]
    if degree >= 1:
        out += [-C1 * y, C1 * z, -C1 * x]
    if degree >= 2:
        out += [
            C2[0] * x * y,
            C2[1] * y * z,
            C2[2] * (2 * z * z - x * x - y * y),
            C2[3] * x * z,
            C2[4] * (x * x - y * y),
        ]
    return np.stack(out, axis=1)


def sh_basis_grad(dirs: np.ndarray, degree: int) -> np.ndarray:
    """d basis / d dir, shape (N, K, 3), treating the direction as a free 3-vector."""
    dirs = np.atleast_2d(dirs)
    n = len(dirs)
    k = (degree + 1) ** 2
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    g = np.zeros((n, k, 3))
    if degree >= 1:
        g[:, 1, 1] = -C1
        g[:, 2, 2] = C1
        g[:, 3, 0] = -C1
    if degree >= 2:
        g[:, 4, 0], g[:, 4, 1] = C2[0] * y, C2[0] * x
        g[:, 5, 1], g[:, 5, 2] = C2[1] * z, C2[1] * y
        g[:, 6, 0], g[:, 6, 1], g[:, 6, 2] = -2 * C2[2] * x, -2 * C2[2] * y, 4 * C2[2] * z
        g[:, 7, 0], g[:, 7, 2] = C2[3] * z, C2[3] * x
        g[:, 8, 0], g[:, 8, 1] = 2 * C2[4] * x, -2 * C2[4] * y
    return g


def sh_eval(coeffs: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Color of one Gaussian: coeffs (K, 3), unit direction (3,) -> RGB, unclamped."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    k = coeffs.shape[0]
    degree = int(round(np.sqrt(k))) - 1
    basis = sh_basis(np.asarray(direction, dtype=np.float64)[None], degree)[0]
    return basis @ coeffs + COLOR_OFFSET


def eval_colors(sh: np.ndarray, dirs: np.ndarray, degree: int) -> np.ndarray:
    """Batched colors (N, 3), unclamped."""
    basis = sh_basis(dirs, degree)
    return np.einsum("nk,nkc->nc", basis, sh) + COLOR_OFFSET
