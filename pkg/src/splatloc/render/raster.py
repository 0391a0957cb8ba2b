"""Tile-binned alpha-blending kernels (forward, pose-backward helper, depth).

All kernels operate on splats already sorted front to back. Pixel ``(x, y)``
is sampled at integer coordinates. Accumulation order is fixed (tile by tile,
pixel by pixel within a tile, splat by splat) so results are bit-reproducible.
"""

from __future__ import annotations

import numba as nb
import numpy as np

TILE = 16
ALPHA_MIN = 1.0 / 255.0
ALPHA_MAX = 0.99
T_MIN = 1e-4

_jit = nb.njit(cache=True, nogil=True, fastmath=False)


@_jit
def bin_tiles(bbox, width, height, tile):
    """CSR lists of splat indices per tile; bbox rows are (x0, x1, y0, y1) in pixels.

    Splats must already be in depth order: each tile list inherits it.
    """
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    m = bbox.shape[0]
    counts = np.zeros(ntx * nty + 1, dtype=np.int64)
    rng = np.empty((m, 4), dtype=np.int64)
    for s in range(m):
        x0 = max(0, int(np.ceil(bbox[s, 0])))
        x1 = min(width - 1, int(np.floor(bbox[s, 1])))
        y0 = max(0, int(np.ceil(bbox[s, 2])))
        y1 = min(height - 1, int(np.floor(bbox[s, 3])))
        if x0 > x1 or y0 > y1:
            rng[s, 0] = 1
            rng[s, 1] = 0
            rng[s, 2] = 1
            rng[s, 3] = 0
            continue
        rng[s, 0] = x0 // tile
        rng[s, 1] = x1 // tile
        rng[s, 2] = y0 // tile
        rng[s, 3] = y1 // tile
        for ty in range(rng[s, 2], rng[s, 3] + 1):
            for tx in range(rng[s, 0], rng[s, 1] + 1):
                counts[ty * ntx + tx + 1] += 1
    start = np.cumsum(counts)
    fill = start[:-1].copy()
    ids = np.empty(start[-1], dtype=np.int64)
    for s in range(m):
        for ty in range(rng[s, 2], rng[s, 3] + 1):
            for tx in range(rng[s, 0], rng[s, 1] + 1):
                t = ty * ntx + tx
                ids[fill[t]] = s
                fill[t] += 1
    return start, ids


@_jit
def _log_thresholds(opac, alpha_min):
    """Per-splat exponent below which alpha is certainly under ``alpha_min``.

    The 1e-9 margin keeps the shortcut strictly conservative, so the skip
    decision is always the one the exact comparison would make.
    """
    out = np.empty(opac.shape[0])
    for s in range(opac.shape[0]):
        out[s] = np.log(alpha_min / opac[s]) - 1e-9 if alpha_min > 0.0 else -np.inf
    return out


@_jit
def raster_forward(means2d, conic, colors, opac, start, ids, width, height, tile, bg,
                   alpha_min, t_min):
    """Front-to-back blend; also returns final transmittance, list ends and contributor counts."""
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    image = np.empty((height, width, 3))
    final_t = np.empty((height, width))
    last = np.zeros((height, width), dtype=np.int64)
    n_contrib = np.zeros((height, width), dtype=np.int64)
    lthr = _log_thresholds(opac, alpha_min)
    for t_idx in range(ntx * nty):
        x0 = (t_idx % ntx) * tile
        y0 = (t_idx // ntx) * tile
        for y in range(y0, min(y0 + tile, height)):
            for x in range(x0, min(x0 + tile, width)):
                T = 1.0
                r = 0.0
                g = 0.0
                b = 0.0
                end = start[t_idx]
                cnt = 0
                px = float(x)
                py = float(y)
                for k in range(start[t_idx], start[t_idx + 1]):
                    s = ids[k]
                    # alpha evaluation is written out inline in every kernel: a shared
                    # helper returning a tuple was ten times slower under numba
                    dx = px - means2d[s, 0]
                    dy = py - means2d[s, 1]
                    power = -0.5 * (conic[s, 0] * dx * dx + conic[s, 2] * dy * dy) - conic[s, 1] * dx * dy
                    if power > 0.0 or power < lthr[s]:
                        continue
                    a = min(ALPHA_MAX, opac[s] * np.exp(power))
                    if a < alpha_min or a == 0.0:
                        continue
                    w = a * T
                    r += colors[s, 0] * w
                    g += colors[s, 1] * w
                    b += colors[s, 2] * w
                    T *= 1.0 - a
                    end = k + 1
                    cnt += 1
                    if T < t_min:
                        break
                image[y, x, 0] = r + T * bg[0]
                image[y, x, 1] = g + T * bg[1]
                image[y, x, 2] = b + T * bg[2]
                final_t[y, x] = T
                last[y, x] = end
                n_contrib[y, x] = cnt
    return image, final_t, last, n_contrib


@_jit
def raster_backward(means2d, conic, colors, opac, start, ids, width, height, tile, bg,
                    final_t, last, dl_dimage, alpha_min):
    """Gradients of a scalar loss w.r.t. splat means, conics and colors.

    Walks each pixel's contributors back to front, recovering transmittance
    by division (alpha <= 0.99 keeps this well conditioned).
    """
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    m = means2d.shape[0]
    g_mean = np.zeros((m, 2))
    g_conic = np.zeros((m, 3))
    g_color = np.zeros((m, 3))
    lthr = _log_thresholds(opac, alpha_min)
    for t_idx in range(ntx * nty):
        x0 = (t_idx % ntx) * tile
        y0 = (t_idx // ntx) * tile
        for y in range(y0, min(y0 + tile, height)):
            for x in range(x0, min(x0 + tile, width)):
                gr = dl_dimage[y, x, 0]
                gg = dl_dimage[y, x, 1]
                gb = dl_dimage[y, x, 2]
                if gr == 0.0 and gg == 0.0 and gb == 0.0:
                    continue
                T = final_t[y, x]
                acc_r = bg[0] * T
                acc_g = bg[1] * T
                acc_b = bg[2] * T
                px = float(x)
                py = float(y)
                for k in range(last[y, x] - 1, start[t_idx] - 1, -1):
                    s = ids[k]
                    dx = px - means2d[s, 0]
                    dy = py - means2d[s, 1]
                    power = -0.5 * (conic[s, 0] * dx * dx + conic[s, 2] * dy * dy) - conic[s, 1] * dx * dy
                    if power > 0.0 or power < lthr[s]:
                        continue
                    raw = opac[s] * np.exp(power)
                    clamped = raw >= ALPHA_MAX
                    a = ALPHA_MAX if clamped else raw
                    if a < alpha_min or a == 0.0:
                        continue
                    inv = 1.0 / (1.0 - a)
                    T = T * inv
                    w = a * T
                    g_color[s, 0] += w * gr
                    g_color[s, 1] += w * gg
                    g_color[s, 2] += w * gb
                    dl_da = (gr * (T * colors[s, 0] - acc_r * inv)
                             + gg * (T * colors[s, 1] - acc_g * inv)
                             + gb * (T * colors[s, 2] - acc_b * inv))
                    acc_r += colors[s, 0] * w
                    acc_g += colors[s, 1] * w
                    acc_b += colors[s, 2] * w
                    if clamped:
                        continue
                    dl_dp = dl_da * a
                    ca = conic[s, 0]
                    cb = conic[s, 1]
                    cc = conic[s, 2]
                    g_mean[s, 0] += dl_dp * (ca * dx + cb * dy)
                    g_mean[s, 1] += dl_dp * (cb * dx + cc * dy)
                    g_conic[s, 0] += dl_dp * (-0.5 * dx * dx)
                    g_conic[s, 1] += dl_dp * (-dx * dy)
                    g_conic[s, 2] += dl_dp * (-0.5 * dy * dy)
    return g_mean, g_conic, g_color


@_jit
def raster_depth(means2d, conic, opac, depth, start, ids, width, height, tile, min_alpha):
    """Depth of the nearest splat whose alpha reaches ``min_alpha``; inf where none does."""
    ntx = (width + tile - 1) // tile
    out = np.full((height, width), np.inf)
    lthr = _log_thresholds(opac, min_alpha)
    for y in range(height):
        ty = y // tile
        for x in range(width):
            t_idx = ty * ntx + x // tile
            for k in range(start[t_idx], start[t_idx + 1]):
                s = ids[k]
                dx = x - means2d[s, 0]
                dy = y - means2d[s, 1]
                power = -0.5 * (conic[s, 0] * dx * dx + conic[s, 2] * dy * dy) - conic[s, 1] * dx * dy
                if power > 0.0 or power < lthr[s]:
                    continue
                if min(ALPHA_MAX, opac[s] * np.exp(power)) >= min_alpha:
                    out[y, x] = depth[s]
                    break
    return out
