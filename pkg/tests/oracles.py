"""Reference implementations used only by the tests.

Each oracle recomputes a result by a route that shares no code with the
implementation under test: dense products, brute-force geometry, explicit
lasso semantics.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ltlabel.abstraction import footprint_polygon
from ltlabel.ltl import LassoWord, satisfies_lasso


# --- labeling -------------------------------------------------------------


def triple_loop_product(M: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``L[i, j] = OR_k M[i, k] AND P[k, j]`` written out literally."""
    n, m = M.shape
    q = P.shape[1]
    L = np.zeros((n, q), dtype=bool)
    for i in range(n):
        for j in range(q):
            acc = False
            for k in range(m):
                acc = acc or (bool(M[i, k]) and bool(P[k, j]))
            L[i, j] = acc
    return L


def dense_product(M: np.ndarray, P: np.ndarray) -> np.ndarray:
    """The same product through integer matrix multiplication."""
    return (M.astype(np.int64) @ P.astype(np.int64)) > 0


def _project(poly: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    p = poly @ axis
    return float(p.min()), float(p.max())


def rect_box_overlap(rect: np.ndarray, box_xy: np.ndarray) -> bool:
    """Positive-area overlap of a convex quadrilateral and an axis-aligned box (separating axes)."""
    (x0, x1), (y0, y1) = box_xy
    box = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    axes = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    for a, b in ((rect[0], rect[1]), (rect[1], rect[2])):
        e = b - a
        axes.append(np.array([-e[1], e[0]]) / math.hypot(*e))
    for ax in axes:
        a0, a1 = _project(rect, ax)
        b0, b1 = _project(box, ax)
        if not max(a0, b0) < min(a1, b1):
            return False
    return True


def geometric_labels(samples: np.ndarray, footprint, boxes_per_prop: list[list[np.ndarray]]) -> np.ndarray:
    """Label edges by testing every sampled footprint against every proposition box.

    Boxes must have their time interval on slab boundaries, so that the slab
    holding a sample's clock lies in the box exactly when the clock does.
    """
    E = samples.shape[0]
    L = np.zeros((E, len(boxes_per_prop)), dtype=bool)
    for e in range(E):
        rects = [footprint_polygon(s, footprint) for s in samples[e]]
        for j, boxes in enumerate(boxes_per_prop):
            hit = False
            for box in boxes:
                t0, t1 = box[2]
                for s, rect in zip(samples[e], rects):
                    if t0 <= s[4] < t1 and rect_box_overlap(rect, box[:2]):
                        hit = True
                        break
                if hit:
                    break
            L[e, j] = hit
    return L


# --- monitors -------------------------------------------------------------


def all_words(n_letters: int, max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(range(n_letters), repeat=n)


def bad_prefix_oracle(f, n_letters: int, max_len: int, ext_stem: int = 2, ext_loop: int = 2) -> dict[tuple, bool]:
    """Whether each word up to ``max_len`` is a bad prefix of ``f``.

    ``u`` counts as good when some lasso ``u v w^omega`` with ``|v| <= ext_stem``
    and ``1 <= |w| <= ext_loop`` satisfies ``f``.  Extensions of a bad word
    are bad; a witness for ``u`` is tried first for ``u``'s one-letter
    extensions.
    """
    exts = [
        (v, w)
        for v in all_words(n_letters, ext_stem)
        for lw in range(1, ext_loop + 1)
        for w in itertools.product(range(n_letters), repeat=lw)
    ]
    bad: dict[tuple, bool] = {}
    witness: dict[tuple, LassoWord] = {}
    for u in all_words(n_letters, max_len):
        parent = u[:-1]
        if u and bad[parent]:
            bad[u] = True
            continue
        hint = witness.get(parent)
        if hint is not None and hint.letter(len(u) - 1) == u[-1]:
            witness[u] = hint
            bad[u] = False
            continue
        found = None
        for v, w in exts:
            word = LassoWord(tuple(u) + v, w)
            if satisfies_lasso(word, f):
                found = word
                break
        bad[u] = found is None
        if found is not None:
            witness[u] = found
    return bad


# --- indexing -------------------------------------------------------------


def z_order_by_descent(points: np.ndarray, bounds, depth: int) -> np.ndarray:
    """Descend a binary partition tree, halving the current cell at every level.

    Level ``i`` halves along axis ``i mod k``; points at or above the split go
    to the upper half and contribute a 1 bit.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    k = pts.shape[1]
    lo = np.tile(np.array([b[0] for b in bounds], dtype=np.float64), (len(pts), 1))
    hi = np.tile(np.array([b[1] for b in bounds], dtype=np.float64), (len(pts), 1))
    code = np.zeros(len(pts), dtype=np.uint64)
    for level in range(depth):
        j = level % k
        mid = 0.5 * (lo[:, j] + hi[:, j])
        upper = pts[:, j] >= mid
        code = (code << np.uint64(1)) | upper.astype(np.uint64)
        lo[upper, j] = mid[upper]
        hi[~upper, j] = mid[~upper]
    return code
