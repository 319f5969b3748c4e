"""Compiled inner loops: footprint sweep rasterization and CSR labeling."""

from __future__ import annotations

import numba as nb
import numpy as np

# the bundled TBB is often too old; prefer layers that work everywhere
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# A grid is passed to kernels as plain arrays:
#   lower, upper: float64[k]; axis_bits: int64[k]
#   level_axis, level_bit: int64[d] (axis and axis-bit feeding each index bit, MSB first)


@nb.njit(cache=True, inline="always")
def _edge(lo, hi, c, bits):
    # must match GridSpec.edge exactly
    return lo + (hi - lo) * (np.float64(c) / np.float64(1 << bits))


@nb.njit(cache=True, inline="always")
def _encode(c0, c1, c2, level_axis, level_bit, d):
    out = np.uint64(0)
    for i in range(d):
        a = level_axis[i]
        c = c0 if a == 0 else (c1 if a == 1 else c2)
        bit = (np.uint64(c) >> np.uint64(level_bit[i])) & np.uint64(1)
        out |= bit << np.uint64(d - 1 - i)
    return out


@nb.njit(cache=True)
def _axis_range(lo, hi, bits, a, b):
    """Cells along one axis whose open interval meets (a, b); half-open [first, last)."""
    n = 1 << bits
    w = (hi - lo) / n
    first = int(np.floor((a - lo) / w)) - 1
    last = int(np.floor((b - lo) / w)) + 2
    if first < 0:
        first = 0
    if last > n:
        last = n
    f = last
    for c in range(first, last):
        if _edge(lo, hi, c, bits) < b and _edge(lo, hi, c + 1, bits) > a:
            f = c
            break
    e = f
    for c in range(last - 1, f - 1, -1):
        if _edge(lo, hi, c, bits) < b and _edge(lo, hi, c + 1, bits) > a:
            e = c + 1
            break
    return f, e


@nb.njit(cache=True)
def slab_of(tau, lo, hi, bits):
    """Cell along an axis containing ``tau`` under ``edge(s) <= tau < edge(s+1)``."""
    n = 1 << bits
    s = int(np.floor((tau - lo) / (hi - lo) * n))
    if s < 0:
        s = 0
    if s > n - 1:
        s = n - 1
    while s > 0 and tau < _edge(lo, hi, s, bits):
        s -= 1
    while s < n - 1 and tau >= _edge(lo, hi, s + 1, bits):
        s += 1
    return s


@nb.njit(cache=True)
def _rect_cells(px, py, th, tau, offset, half_l, half_w, lower, upper, axis_bits, level_axis, level_bit, d, buf, m):
    """Append z-indices of cells met by one oriented footprint to ``buf[m:]``."""
    ux = np.cos(th)
    uy = np.sin(th)
    cx = px + offset * ux
    cy = py + offset * uy
    ex = abs(ux) * half_l + abs(uy) * half_w
    ey = abs(uy) * half_l + abs(ux) * half_w
    x0, x1 = _axis_range(lower[0], upper[0], axis_bits[0], cx - ex, cx + ex)
    y0, y1 = _axis_range(lower[1], upper[1], axis_bits[1], cy - ey, cy + ey)
    s = slab_of(tau, lower[2], upper[2], axis_bits[2])
    cu = cx * ux + cy * uy
    cn = -cx * uy + cy * ux
    for i in range(x0, x1):
        bx0 = _edge(lower[0], upper[0], i, axis_bits[0])
        bx1 = _edge(lower[0], upper[0], i + 1, axis_bits[0])
        for j in range(y0, y1):
            by0 = _edge(lower[1], upper[1], j, axis_bits[1])
            by1 = _edge(lower[1], upper[1], j + 1, axis_bits[1])
            # separating axes of the footprint
            pu0 = bx0 * ux + by0 * uy
            pu1 = bx1 * ux + by0 * uy
            pu2 = bx0 * ux + by1 * uy
            pu3 = bx1 * ux + by1 * uy
            umin = min(min(pu0, pu1), min(pu2, pu3))
            umax = max(max(pu0, pu1), max(pu2, pu3))
            if not (umax > cu - half_l and umin < cu + half_l):
                continue
            pn0 = -bx0 * uy + by0 * ux
            pn1 = -bx1 * uy + by0 * ux
            pn2 = -bx0 * uy + by1 * ux
            pn3 = -bx1 * uy + by1 * ux
            nmin = min(min(pn0, pn1), min(pn2, pn3))
            nmax = max(max(pn0, pn1), max(pn2, pn3))
            if not (nmax > cn - half_w and nmin < cn + half_w):
                continue
            buf[m] = _encode(i, j, s, level_axis, level_bit, d)
            m += 1
    return m


@nb.njit(cache=True)
def _row_cells(samples, e, offset, half_l, half_w, lower, upper, axis_bits, level_axis, level_bit, d):
    n = samples.shape[1]
    wx = (upper[0] - lower[0]) / (1 << axis_bits[0])
    wy = (upper[1] - lower[1]) / (1 << axis_bits[1])
    r = np.hypot(half_l, half_w) + abs(offset)
    per = (int(2 * r / wx) + 4) * (int(2 * r / wy) + 4)
    buf = np.empty(n * per, dtype=np.uint64)
    m = 0
    for t in range(n):
        m = _rect_cells(
            samples[e, t, 0], samples[e, t, 1], samples[e, t, 2], samples[e, t, 4],
            offset, half_l, half_w, lower, upper, axis_bits, level_axis, level_bit, d, buf, m,
        )
    return np.unique(buf[:m])


@nb.njit(cache=True, parallel=True)
def sweep_csr(samples, offset, half_l, half_w, lower, upper, axis_bits, level_axis, level_bit, d):
    """CSR rows of swept footprints, one row per trajectory in ``samples[E, n, 5]``."""
    n_rows = samples.shape[0]
    counts = np.zeros(n_rows, dtype=np.int64)
    for e in nb.prange(n_rows):
        counts[e] = _row_cells(samples, e, offset, half_l, half_w, lower, upper, axis_bits, level_axis, level_bit, d).size
    offsets = np.zeros(n_rows + 1, dtype=np.int64)
    for e in range(n_rows):
        offsets[e + 1] = offsets[e] + counts[e]
    indices = np.empty(offsets[n_rows], dtype=np.uint64)
    for e in nb.prange(n_rows):
        row = _row_cells(samples, e, offset, half_l, half_w, lower, upper, axis_bits, level_axis, level_bit, d)
        indices[offsets[e] : offsets[e + 1]] = row
    return offsets, indices


# --------------------------------------------------------------------------
# labeling


@nb.njit(cache=True, inline="always")
def _test_bit(words, c):
    return (words[c >> 6] >> (c & 63)) & 1


@nb.njit(cache=True, parallel=True)
def label_rows(row_offsets, col_indices, prop_words, out):
    """``out[i, j]`` = row ``i`` shares a cell with proposition ``j``; stops at the first witness."""
    n_rows = row_offsets.shape[0] - 1
    n_props = prop_words.shape[0]
    for i in nb.prange(n_rows):
        a = row_offsets[i]
        b = row_offsets[i + 1]
        for j in range(n_props):
            words = prop_words[j]
            hit = False
            for k in range(a, b):
                c = np.uint64(col_indices[k])
                if _test_bit(words, c):
                    hit = True
                    break
            out[i, j] = hit


@nb.njit(cache=True, parallel=True)
def label_rows_counting(row_offsets, col_indices, prop_words, out, examined):
    """As :func:`label_rows`, also recording how many stored indices were read."""
    n_rows = row_offsets.shape[0] - 1
    n_props = prop_words.shape[0]
    for i in nb.prange(n_rows):
        a = row_offsets[i]
        b = row_offsets[i + 1]
        for j in range(n_props):
            words = prop_words[j]
            hit = False
            read = b - a
            for k in range(a, b):
                c = np.uint64(col_indices[k])
                if _test_bit(words, c):
                    hit = True
                    read = k - a + 1
                    break
            out[i, j] = hit
            examined[i, j] = read


@nb.njit(cache=True)
def first_witness(indices, words):
    """Position of the first stored index present in ``words``, or -1."""
    for k in range(indices.shape[0]):
        if _test_bit(words, np.uint64(indices[k])):
            return k
    return -1
