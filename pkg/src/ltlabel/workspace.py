"""Z-order indexed occupancy grids over rectangular workspaces.

A :class:`GridSpec` splits ``[l_0, u_0) x ... x [l_{k-1}, u_{k-1})`` into
``2^d`` cells.  Level ``i`` of the index (most significant first) splits
axis ``i mod k``, so axis ``j`` receives ``d // k`` bits plus one extra when
``j < d % k``.  Subsets of the workspace are stored as :class:`OccupancyBitset`
values: packed little-endian 64-bit words, bit ``n`` set when the subset
meets cell ``n`` with positive measure.
"""

from __future__ import annotations

import json
import struct
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "GridSpec",
    "OccupancyBitset",
    "GridMismatchError",
    "z_index",
    "z_index_tree_descent",
    "cell_bounds",
    "rasterize_box",
    "rasterize_boxes",
    "intersects",
    "morton_encode",
    "morton_decode",
]

BITSET_MAGIC = b"OCCB"
_HEADER = struct.Struct("<4sIII")  # magic, k, d, reserved


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    bounds: tuple[tuple[float, float], ...]
    depth: int

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not bounds:
            raise ValueError("a grid needs at least one axis")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"empty axis interval [{lo}, {hi}]")
        if not 0 <= self.depth <= 63:
            raise ValueError(f"depth must lie in [0, 63], got {self.depth}")

    @property
    def k(self) -> int:
        return len(self.bounds)

    @property
    def n_cells(self) -> int:
        return 1 << self.depth

    @property
    def n_words(self) -> int:
        return max(1, self.n_cells >> 6)

    @cached_property
    def axis_bits(self) -> tuple[int, ...]:
        d, k = self.depth, self.k
        return tuple(d // k + (1 if j < d % k else 0) for j in range(k))

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @cached_property
    def cells_per_axis(self) -> np.ndarray:
        return np.array([1 << b for b in self.axis_bits], dtype=np.int64)

    @cached_property
    def cell_size(self) -> np.ndarray:
        return (self.upper - self.lower) / self.cells_per_axis

    def edge(self, axis: int, c):
        """Coordinate of the lower face of cell ``c`` along ``axis``.

        Every cell boundary comparison in the package goes through this one
        expression so that geometry and grid agree bit for bit.
        """
        lo, hi = self.bounds[axis]
        return lo + (hi - lo) * (np.asarray(c, dtype=np.float64) / float(1 << self.axis_bits[axis]))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((p >= self.lower) & (p < self.upper), axis=1)

    def to_json(self) -> str:
        return json.dumps({"bounds": [list(b) for b in self.bounds], "d": self.depth})

    @classmethod
    def from_json(cls, text: str) -> "GridSpec":
        doc = json.loads(text)
        return cls(tuple(tuple(b) for b in doc["bounds"]), int(doc["d"]))

    @cached_property
    def _level_axis(self) -> tuple[np.ndarray, np.ndarray]:
        # for each index bit (MSB first): which axis, and which bit of that axis
        axis = np.arange(self.depth) % self.k
        seen = np.zeros(self.k, dtype=np.int64)
        abit = np.empty(self.depth, dtype=np.int64)
        for i, j in enumerate(axis):
            abit[i] = self.axis_bits[j] - 1 - seen[j]
            seen[j] += 1
        return axis.astype(np.int64), abit


# --------------------------------------------------------------------------
# indexing


def morton_encode(coords, g: GridSpec) -> np.ndarray:
    """Interleave integer cell coordinates ``(..., k)`` into z-indices."""
    c = np.asarray(coords, dtype=np.uint64)
    out = np.zeros(c.shape[:-1], dtype=np.uint64)
    axis, abit = g._level_axis
    d = g.depth
    for i in range(d):
        bit = (c[..., axis[i]] >> np.uint64(abit[i])) & np.uint64(1)
        out |= bit << np.uint64(d - 1 - i)
    return out


def morton_decode(index, g: GridSpec) -> np.ndarray:
    """Inverse of :func:`morton_encode`; returns ``int64`` coordinates ``(..., k)``."""
    n = np.asarray(index, dtype=np.uint64)
    out = np.zeros(n.shape + (g.k,), dtype=np.uint64)
    axis, abit = g._level_axis
    d = g.depth
    for i in range(d):
        bit = (n >> np.uint64(d - 1 - i)) & np.uint64(1)
        out[..., axis[i]] |= bit << np.uint64(abit[i])
    return out.astype(np.int64)


def _normalize(points, g: GridSpec) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.shape[-1] != g.k:
        raise ValueError(f"expected points with {g.k} coordinates, got shape {p.shape}")
    flat = p.reshape(-1, g.k)
    bad = ~g.contains(flat)
    if bad.any():
        raise ValueError(f"point {flat[np.argmax(bad)].tolist()} lies outside the workspace")
    return (p - g.lower) / (g.upper - g.lower)


def cell_coords(points, g: GridSpec) -> np.ndarray:
    """Integer cell coordinates of in-bounds points."""
    z = _normalize(points, g)
    q = np.floor(z * g.cells_per_axis).astype(np.int64)
    return np.minimum(q, g.cells_per_axis - 1)


def z_index(points, g: GridSpec):
    """Z-order index of a point (or array of points) by bit interleaving.

    Each axis is quantized to its share of the ``d`` bits; a coordinate on a
    cell boundary belongs to the upper cell.

    >>> g = GridSpec(((0, 1), (0, 1)), 4)
    >>> int(z_index((0.6, 0.2), g))
    8
    """
    out = morton_encode(cell_coords(points, g), g)
    return int(out) if out.ndim == 0 else out


def z_index_tree_descent(points, g: GridSpec):
    """Reference z-index by descending the binary space-partitioning tree.

    At level ``i`` the splitting plane is the current pivot along axis
    ``i mod k``; points at or above it add ``2^(d-1-i)`` and move the pivot
    up by half the remaining extent, otherwise the pivot moves down.
    """
    z = np.atleast_2d(_normalize(points, g))
    n = np.zeros(len(z), dtype=np.uint64)
    pivot = np.full((len(z), g.k), 0.5)
    step = np.full(g.k, 0.25)
    for i in range(g.depth):
        j = i % g.k
        upper = z[:, j] >= pivot[:, j]
        n[upper] |= np.uint64(1) << np.uint64(g.depth - 1 - i)
        pivot[:, j] += np.where(upper, step[j], -step[j])
        step[j] *= 0.5
    if np.ndim(points) == 1:
        return int(n[0])
    return n


def cell_bounds(index: int, g: GridSpec) -> np.ndarray:
    """Box ``[[lo_0, hi_0], ...]`` of cell ``index``."""
    if not 0 <= int(index) < g.n_cells:
        raise ValueError(f"cell index {index} outside [0, {g.n_cells})")
    c = morton_decode(np.uint64(index), g)
    return np.array([[g.edge(a, c[a]), g.edge(a, c[a] + 1)] for a in range(g.k)])


def cell_center(index: int, g: GridSpec) -> np.ndarray:
    return cell_bounds(index, g).mean(axis=1)


# --------------------------------------------------------------------------
# bitsets


class OccupancyBitset:
    """Fixed-length bit vector with one bit per grid cell."""

    __slots__ = ("grid", "words")

    def __init__(self, grid: GridSpec, words: np.ndarray | None = None):
        self.grid = grid
        if words is None:
            words = np.zeros(grid.n_words, dtype=np.uint64)
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.shape != (grid.n_words,):
            raise ValueError(f"expected {grid.n_words} words, got {words.shape}")
        if grid.n_cells < 64:
            words = words & np.uint64((1 << grid.n_cells) - 1)
        self.words = words

    @classmethod
    def from_indices(cls, grid: GridSpec, indices: Iterable[int] | np.ndarray) -> "OccupancyBitset":
        idx = np.asarray(indices if isinstance(indices, np.ndarray) else list(indices), dtype=np.uint64)
        if idx.size and int(idx.max()) >= grid.n_cells:
            raise ValueError("cell index out of range")
        words = np.zeros(grid.n_words, dtype=np.uint64)
        np.bitwise_or.at(words, (idx >> np.uint64(6)).astype(np.int64), np.uint64(1) << (idx & np.uint64(63)))
        return cls(grid, words)

    @classmethod
    def from_bool(cls, grid: GridSpec, dense) -> "OccupancyBitset":
        dense = np.asarray(dense, dtype=bool)
        if dense.shape != (grid.n_cells,):
            raise ValueError(f"expected {grid.n_cells} cells, got {dense.shape}")
        padded = np.zeros(grid.n_words * 64, dtype=bool)
        padded[: grid.n_cells] = dense
        return cls(grid, np.packbits(padded, bitorder="little").view("<u8").astype(np.uint64))

    @classmethod
    def full(cls, grid: GridSpec) -> "OccupancyBitset":
        return cls.from_bool(grid, np.ones(grid.n_cells, dtype=bool))

    def to_bool(self) -> np.ndarray:
        bits = np.unpackbits(self.words.astype("<u8").view(np.uint8), bitorder="little")
        return bits[: self.grid.n_cells].astype(bool)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.to_bool()).astype(np.int64)

    def count(self) -> int:
        return int(np.bitwise_count(self.words).sum()) if hasattr(np, "bitwise_count") else int(
            self.to_bool().sum()
        )

    def occupancy(self) -> float:
        return self.count() / self.grid.n_cells

    def __contains__(self, index: int) -> bool:
        return bool(self.words[index >> 6] >> np.uint64(index & 63) & np.uint64(1))

    def _check(self, other: "OccupancyBitset") -> None:
        if not isinstance(other, OccupancyBitset):
            raise TypeError("expected an OccupancyBitset")
        if other.grid != self.grid:
            raise GridMismatchError("bitsets are defined on different grids")

    def __or__(self, other: "OccupancyBitset") -> "OccupancyBitset":
        self._check(other)
        return OccupancyBitset(self.grid, self.words | other.words)

    def __and__(self, other: "OccupancyBitset") -> "OccupancyBitset":
        self._check(other)
        return OccupancyBitset(self.grid, self.words & other.words)

    def __invert__(self) -> "OccupancyBitset":
        return OccupancyBitset(self.grid, ~self.words)

    def __eq__(self, other) -> bool:
        return isinstance(other, OccupancyBitset) and self.grid == other.grid and np.array_equal(
            self.words, other.words
        )

    def issubset(self, other: "OccupancyBitset") -> bool:
        self._check(other)
        return not np.any(self.words & ~other.words)

    def intersects(self, other: "OccupancyBitset", chunk: int = 4096) -> bool:
        self._check(other)
        a, b = self.words, other.words
        for s in range(0, len(a), chunk):
            if np.any(a[s : s + chunk] & b[s : s + chunk]):
                return True
        return False

    def __repr__(self) -> str:
        return f"OccupancyBitset(d={self.grid.depth}, count={self.count()})"

    def to_bytes(self) -> bytes:
        return _HEADER.pack(BITSET_MAGIC, self.grid.k, self.grid.depth, 0) + self.words.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, grid: GridSpec) -> "OccupancyBitset":
        magic, k, d, _ = _HEADER.unpack_from(data)
        if magic != BITSET_MAGIC:
            raise ValueError("not an occupancy bitset file")
        if (k, d) != (grid.k, grid.depth):
            raise GridMismatchError(f"file has k={k}, d={d}; grid has k={grid.k}, d={grid.depth}")
        words = np.frombuffer(data, dtype="<u8", offset=_HEADER.size)
        return cls(grid, words.astype(np.uint64))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path, grid: GridSpec) -> "OccupancyBitset":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), grid)


def intersects(a: OccupancyBitset, b: OccupancyBitset) -> bool:
    """Whether the two subsets share a cell."""
    return a.intersects(b)


# --------------------------------------------------------------------------
# rasterization


def axis_cell_range(g: GridSpec, axis: int, lo: float, hi: float) -> tuple[int, int]:
    """Half-open range of cells whose open interval meets ``(lo, hi)``."""
    n = 1 << g.axis_bits[axis]
    if not hi > lo:
        return 0, 0
    w = g.cell_size[axis]
    base = g.bounds[axis][0]
    first = max(0, int(np.floor((lo - base) / w)) - 1)
    last = min(n, int(np.floor((hi - base) / w)) + 2)
    if first >= last:
        return 0, 0
    c = np.arange(first, last)
    ok = (g.edge(axis, c) < hi) & (g.edge(axis, c + 1) > lo)
    hits = c[ok]
    if hits.size == 0:
        return 0, 0
    return int(hits[0]), int(hits[-1]) + 1


def box_cells(box, g: GridSpec) -> np.ndarray:
    """Z-indices of the cells overlapping an axis-aligned box with positive measure."""
    b = np.asarray(box, dtype=np.float64).reshape(g.k, 2)
    ranges = [axis_cell_range(g, a, b[a, 0], b[a, 1]) for a in range(g.k)]
    if any(r0 >= r1 for r0, r1 in ranges):
        return np.empty(0, dtype=np.uint64)
    mesh = np.meshgrid(*[np.arange(r0, r1) for r0, r1 in ranges], indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)
    return morton_encode(coords, g)


def rasterize_box(box, g: GridSpec) -> OccupancyBitset:
    """Conservative voxelization of an axis-aligned box ``[[lo, hi], ...]``.

    Cells that only share a face with the box are not set.
    """
    b = np.asarray(box, dtype=np.float64).reshape(g.k, 2)
    if np.any(b[:, 1] <= g.lower) or np.any(b[:, 0] >= g.upper):
        raise ValueError("box does not intersect the workspace")
    return OccupancyBitset.from_indices(g, box_cells(b, g))


def rasterize_boxes(boxes: Sequence, g: GridSpec) -> OccupancyBitset:
    """Union of :func:`rasterize_box` over ``boxes``, skipping ones outside the workspace."""
    parts = []
    for box in boxes:
        b = np.asarray(box, dtype=np.float64).reshape(g.k, 2)
        if np.any(b[:, 1] <= g.lower) or np.any(b[:, 0] >= g.upper):
            continue
        parts.append(box_cells(b, g))
    idx = np.concatenate(parts) if parts else np.empty(0, dtype=np.uint64)
    return OccupancyBitset.from_indices(g, idx)
