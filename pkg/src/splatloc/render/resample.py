"""Area resampling of images onto coarser grids."""

from __future__ import annotations

import numpy as np


def area_matrix(n: int, m: int) -> np.ndarray:
    """m x n matrix averaging n unit-width samples into m equal cells (fractional overlaps).

    Rows sum to 1. Cell ``j`` covers ``[j * n / m, (j + 1) * n / m)``, which
    keeps pixel centers consistent with :meth:`Camera.scaled`.
    """
    edges = np.arange(m + 1) * (n / m)
    lo = np.maximum(edges[:-1, None], np.arange(n)[None, :])
    hi = np.minimum(edges[1:, None], np.arange(n)[None, :] + 1)
    return np.clip(hi - lo, 0.0, None) * (m / n)


def resize_area(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Box-filter an H x W x C image down (or up) to ``height`` x ``width``."""
    Ay = area_matrix(img.shape[0], height)
    Ax = area_matrix(img.shape[1], width)
    return np.einsum("ih,hwc,jw->ijc", Ay, img, Ax)
