"""Labeling transitions by sparse boolean matrix products.

Row ``i`` of a :class:`CsrBoolMatrix` lists the cells swept by transition
``i``; column ``j`` of a :class:`DensePropMatrix` is the occupancy of
proposition ``j``.  Their boolean product is the label matrix.  The product
is evaluated one row per worker with an early exit at the first shared cell.
"""

from __future__ import annotations

import csv
import io
import struct
from collections.abc import Iterable, Sequence
from contextlib import contextmanager
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_csr_arrays, check_shapes
from .ltl import Alphabet
from .workspace import GridMismatchError, GridSpec, OccupancyBitset

__all__ = [
    "CsrBoolMatrix",
    "DensePropMatrix",
    "LabelMatrix",
    "LabeledGraph",
    "to_csr",
    "label_all",
    "label_edge_counting",
    "apply_labels",
    "SweptVolumeLabeler",
    "SweptVolumeEncoder",
]

_CSR_MAGIC = b"CSRB"
_CSR_HEADER = struct.Struct("<4sIQQQ")  # magic, flags, rows, cols, nnz
_WIDE = 1  # flag: 64-bit offsets and indices
_LABEL_MAGIC = b"LBLM"


def _pack_columns(dense: np.ndarray) -> np.ndarray:
    """Pack a ``(n_cells, m)`` bool array into ``(m, n_words)`` little-endian words."""
    n, m = dense.shape
    n_words = max(1, -(-n // 64))
    padded = np.zeros((m, n_words * 64), dtype=bool)
    padded[:, :n] = dense.T
    return np.packbits(padded, axis=1, bitorder="little").view("<u8").astype(np.uint64)


class CsrBoolMatrix:
    """Boolean matrix in compressed sparse row form (only the positions of true entries)."""

    __slots__ = ("row_offsets", "col_indices", "n_cols")

    def __init__(self, row_offsets, col_indices, n_cols: int):
        self.n_cols = int(n_cols)
        self.row_offsets, self.col_indices = check_csr_arrays(row_offsets, col_indices, self.n_cols)

    @property
    def n_rows(self) -> int:
        return self.row_offsets.size - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return int(self.col_indices.size)

    def row(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i] : self.row_offsets[i + 1]]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CsrBoolMatrix)
            and self.n_cols == other.n_cols
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        )

    def __repr__(self) -> str:
        return f"CsrBoolMatrix(shape={self.shape}, nnz={self.nnz})"

    @classmethod
    def from_dense(cls, dense) -> "CsrBoolMatrix":
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        rows, cols = np.nonzero(dense)
        offsets = np.zeros(dense.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=dense.shape[0]), out=offsets[1:])
        return cls(offsets, cols, dense.shape[1])

    @classmethod
    def from_scipy(cls, m) -> "CsrBoolMatrix":
        m = sp.csr_array(m)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.indptr, m.indices, m.shape[1])

    def to_scipy(self) -> sp.csr_array:
        data = np.ones(self.nnz, dtype=bool)
        return sp.csr_array((data, self.col_indices, self.row_offsets), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        rows = np.repeat(np.arange(self.n_rows), self.row_nnz())
        out[rows, self.col_indices] = True
        return out

    def to_bitsets(self, grid: GridSpec) -> list[OccupancyBitset]:
        if grid.n_cells != self.n_cols:
            raise GridMismatchError(f"grid has {grid.n_cells} cells, matrix has {self.n_cols} columns")
        return [OccupancyBitset.from_indices(grid, self.row(i)) for i in range(self.n_rows)]

    # --- file format
    def to_bytes(self, wide: bool | None = None) -> bytes:
        if wide is None:
            wide = self.nnz >= 2**32 or self.n_cols > 2**32
        dt = "<u8" if wide else "<u4"
        head = _CSR_HEADER.pack(_CSR_MAGIC, _WIDE if wide else 0, self.n_rows, self.n_cols, self.nnz)
        return head + self.row_offsets.astype(dt).tobytes() + self.col_indices.astype(dt).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CsrBoolMatrix":
        magic, flags, rows, cols, nnz = _CSR_HEADER.unpack_from(data)
        if magic != _CSR_MAGIC:
            raise ValueError("not a CSR boolean matrix file")
        dt = np.dtype("<u8" if flags & _WIDE else "<u4")
        off = _CSR_HEADER.size
        offsets = np.frombuffer(data, dtype=dt, count=rows + 1, offset=off)
        indices = np.frombuffer(data, dtype=dt, count=nnz, offset=off + (rows + 1) * dt.itemsize)
        return cls(offsets.astype(np.int64), indices.astype(np.int64), cols)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "CsrBoolMatrix":
        return cls.from_bytes(Path(path).read_bytes())


def to_csr(rows) -> CsrBoolMatrix:
    """Build a CSR matrix from bitsets, a dense boolean array or a scipy sparse matrix."""
    if isinstance(rows, CsrBoolMatrix):
        return rows
    if sp.issparse(rows):
        return CsrBoolMatrix.from_scipy(rows)
    if isinstance(rows, np.ndarray):
        return CsrBoolMatrix.from_dense(rows)
    rows = list(rows)
    if not rows:
        return CsrBoolMatrix(np.zeros(1, dtype=np.int64), np.empty(0, dtype=np.int64), 0)
    if not all(isinstance(r, OccupancyBitset) for r in rows):
        return CsrBoolMatrix.from_dense(np.asarray(rows, dtype=bool))
    grid = rows[0].grid
    parts = []
    for r in rows:
        if r.grid != grid:
            raise GridMismatchError("rows are defined on different grids")
        parts.append(r.indices())
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([p.size for p in parts], out=offsets[1:])
    return CsrBoolMatrix(offsets, np.concatenate(parts), grid.n_cells)


class DensePropMatrix:
    """Column-major bit matrix: one packed occupancy vector per proposition."""

    __slots__ = ("words", "n_rows", "names")

    def __init__(self, words, n_rows: int, names: Sequence[str] | None = None):
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 2:
            raise ValueError("words must have shape (n_props, n_words)")
        if words.shape[1] != max(1, -(-int(n_rows) // 64)):
            raise ValueError(f"{words.shape[1]} words cannot hold {n_rows} rows")
        self.words = words
        self.n_rows = int(n_rows)
        self.names = tuple(names) if names is not None else tuple(f"p{j}" for j in range(words.shape[0]))
        if len(self.names) != words.shape[0]:
            raise ValueError("one name per proposition column is required")

    @property
    def n_props(self) -> int:
        return self.words.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_props

    @classmethod
    def from_bitsets(cls, props, names: Sequence[str] | None = None) -> "DensePropMatrix":
        if isinstance(props, dict):
            names, props = list(props), list(props.values())
        props = list(props)
        if not props:
            raise ValueError("at least one proposition is required")
        grid = props[0].grid
        if any(p.grid != grid for p in props):
            raise GridMismatchError("propositions are defined on different grids")
        return cls(np.stack([p.words for p in props]), grid.n_cells, names)

    @classmethod
    def from_dense(cls, dense, names: Sequence[str] | None = None) -> "DensePropMatrix":
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim == 1:
            dense = dense[:, None]
        return cls(_pack_columns(dense), dense.shape[0], names)

    def to_dense(self) -> np.ndarray:
        bits = np.unpackbits(self.words.astype("<u8").view(np.uint8), axis=1, bitorder="little")
        return bits[:, : self.n_rows].T.astype(bool)

    def column(self, j: int) -> np.ndarray:
        return self.words[j]

    def occupancy(self) -> np.ndarray:
        return np.bitwise_count(self.words).sum(axis=1) / self.n_rows


class LabelMatrix:
    """``data[i, j]`` is true when proposition ``j`` labels transition ``i``."""

    __slots__ = ("data", "names")

    def __init__(self, data, names: Sequence[str]):
        self.data = np.asarray(data, dtype=bool)
        self.names = tuple(names)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.names):
            raise ValueError(f"label data of shape {self.data.shape} does not fit {len(self.names)} names")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelMatrix) and self.names == other.names and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"LabelMatrix(shape={self.shape}, names={list(self.names)})"

    def masks(self) -> np.ndarray:
        """Per-row bitmask letters (bit ``j`` for proposition ``j``)."""
        weights = np.left_shift(np.uint64(1), np.arange(len(self.names), dtype=np.uint64))
        return (self.data.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["edge", "propositions"])
        for i, row in enumerate(self.data):
            w.writerow([i, ";".join(n for n, b in zip(self.names, row) if b)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, names: Sequence[str]) -> "LabelMatrix":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        col = {n: j for j, n in enumerate(names)}
        data = np.zeros((len(rows), len(names)), dtype=bool)
        for i, (_, props) in enumerate(rows):
            for n in filter(None, props.split(";")):
                data[i, col[n]] = True
        return cls(data, names)

    def to_bytes(self) -> bytes:
        names = "\n".join(self.names).encode()
        head = struct.pack("<4sQQI", _LABEL_MAGIC, *self.shape, len(names))
        return head + names + np.packbits(self.data, axis=None, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "LabelMatrix":
        magic, rows, cols, nlen = struct.unpack_from("<4sQQI", data)
        if magic != _LABEL_MAGIC:
            raise ValueError("not a label matrix file")
        off = struct.calcsize("<4sQQI")
        names = data[off : off + nlen].decode().split("\n") if nlen else []
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=off + nlen), bitorder="little")
        return cls(bits[: rows * cols].reshape(rows, cols).astype(bool), names)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_bytes(self.to_bytes())


@contextmanager
def _threads(workers: int | None):
    if workers is None:
        yield
        return
    prev = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(prev)


def _coerce_props(P) -> DensePropMatrix:
    if isinstance(P, DensePropMatrix):
        return P
    if isinstance(P, OccupancyBitset):
        return DensePropMatrix.from_bitsets([P])
    if isinstance(P, dict) or (isinstance(P, (list, tuple)) and P and isinstance(P[0], OccupancyBitset)):
        return DensePropMatrix.from_bitsets(P)
    return DensePropMatrix.from_dense(P)


def label_all(M, P, *, workers: int | None = None, counts: bool = False):
    """Boolean product ``L = M P`` with a per-entry early exit.

    Returns a :class:`LabelMatrix`; with ``counts=True`` also the number of
    stored indices read for every entry.
    """
    M = to_csr(M)
    P = _coerce_props(P)
    check_shapes(M.n_cols, P.n_rows, "label_all")
    out = np.zeros((M.n_rows, P.n_props), dtype=np.bool_)
    with _threads(workers):
        if counts:
            examined = np.zeros((M.n_rows, P.n_props), dtype=np.int64)
            _kernels.label_rows_counting(M.row_offsets, M.col_indices, P.words, out, examined)
            return LabelMatrix(out, P.names), examined
        _kernels.label_rows(M.row_offsets, M.col_indices, P.words, out)
    return LabelMatrix(out, P.names)


def label_edge_counting(row, prop) -> tuple[bool, int]:
    """Label one (row, proposition) pair; also return how many indices were read."""
    idx = np.ascontiguousarray(row, dtype=np.int64)
    if isinstance(prop, OccupancyBitset):
        words = prop.words
    else:
        words = np.ascontiguousarray(prop, dtype=np.uint64)
    if idx.size and int(idx.max()) >= words.size * 64:
        raise ValueError("row index beyond the proposition column")
    k = int(_kernels.first_witness(idx, words))
    return (True, k + 1) if k >= 0 else (False, int(idx.size))


# --------------------------------------------------------------------------
# labeled graphs


class LabeledGraph:
    """Directed graph whose edges carry a cost and a letter over ``alphabet``."""

    def __init__(self, n_vertices: int, edges, costs, labels, alphabet):
        self.n_vertices = int(n_vertices)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.costs = np.asarray(costs, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(labels, dtype=np.uint64).reshape(-1)
        self.alphabet = Alphabet.coerce(alphabet)
        E = len(self.edges)
        if self.costs.size != E or self.labels.size != E:
            raise ValueError(f"{E} edges but {self.costs.size} costs and {self.labels.size} labels")
        if E and (self.edges.min() < 0 or self.edges.max() >= self.n_vertices):
            raise ValueError("edge endpoint out of range")
        if E and int(self.labels.max()) >> len(self.alphabet):
            raise ValueError("label uses a proposition outside the alphabet")
        order = np.argsort(self.edges[:, 0], kind="stable")
        self._order = order
        self._start = np.searchsorted(self.edges[order, 0], np.arange(self.n_vertices + 1))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def out_edges(self, v: int) -> np.ndarray:
        """Edge ids leaving ``v`` in insertion order."""
        return self._order[self._start[v] : self._start[v + 1]]

    def find_edge(self, u: int, v: int) -> int | None:
        """Cheapest edge from ``u`` to ``v`` (lowest id on ties), or ``None``."""
        best = None
        for e in self.out_edges(u):
            if self.edges[e, 1] == v and (best is None or self.costs[e] < self.costs[best]):
                best = int(e)
        return best

    def label_names(self, e: int) -> tuple[str, ...]:
        return self.alphabet.names_of(int(self.labels[e]))

    def to_json_dict(self) -> dict:
        return {
            "propositions": list(self.alphabet.names),
            "n_vertices": self.n_vertices,
            "edges": [
                {"src": int(a), "dst": int(b), "cost": float(c), "labels": list(self.label_names(e))}
                for e, ((a, b), c) in enumerate(zip(self.edges, self.costs))
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LabeledGraph":
        alphabet = Alphabet(doc["propositions"])
        edges = [(e["src"], e["dst"]) for e in doc["edges"]]
        costs = [e.get("cost", 1.0) for e in doc["edges"]]
        labels = [alphabet.symbol(e.get("labels", ())) for e in doc["edges"]]
        return cls(doc["n_vertices"], edges, costs, labels, alphabet)


def apply_labels(system, L: LabelMatrix, alphabet: Iterable[str] | Alphabet | None = None) -> LabeledGraph:
    """Attach the rows of ``L`` to the edges of a transition system."""
    alphabet = Alphabet.coerce(alphabet if alphabet is not None else L.names)
    if L.shape[0] != system.n_edges:
        raise ValueError(f"label matrix has {L.shape[0]} rows for {system.n_edges} edges")
    if tuple(alphabet.names) != L.names:
        if set(L.names) - set(alphabet.names):
            raise ValueError(f"labels {sorted(set(L.names) - set(alphabet.names))} are not in the alphabet")
        data = np.zeros((L.shape[0], len(alphabet)), dtype=bool)
        for j, n in enumerate(L.names):
            data[:, alphabet[n].id] = L.data[:, j]
        L = LabelMatrix(data, alphabet.names)
    return LabeledGraph(system.n_vertices, system.edges, system.costs, L.masks(), alphabet)


# --------------------------------------------------------------------------
# estimator interface


class SweptVolumeLabeler(TransformerMixin, BaseEstimator):
    """Transformer from swept-volume rows to proposition labels.

    ``fit`` takes the proposition occupancy (a :class:`DensePropMatrix`, a
    mapping of names to bitsets, or a dense ``(n_cells, n_props)`` array).
    ``transform`` takes a CSR matrix of swept cells (ours or scipy's) and
    returns the boolean ``(n_transitions, n_props)`` label array.
    """

    def __init__(self, workers: int | None = None, early_exit: bool = True):
        self.workers = workers
        self.early_exit = early_exit

    def fit(self, P, y=None):
        self.props_ = _coerce_props(P)
        self.n_features_in_ = self.props_.n_rows
        self.feature_names_out_ = np.asarray(self.props_.names, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "props_")
        M = to_csr(X)
        check_shapes(M.n_cols, self.n_features_in_, "transform")
        if self.early_exit:
            return label_all(M, self.props_, workers=self.workers).data
        dense = self.props_.to_dense().astype(np.int64)
        return (M.to_scipy().astype(np.int64) @ dense) > 0

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "props_")
        return self.feature_names_out_.copy()


class SweptVolumeEncoder(TransformerMixin, BaseEstimator):
    """Transformer from transition systems (or ``(E, n, 5)`` samples) to swept-volume CSR rows."""

    def __init__(self, grid: GridSpec | None = None, footprint=None):
        self.grid = grid
        self.footprint = footprint

    def fit(self, X=None, y=None):
        if not isinstance(self.grid, GridSpec):
            raise TypeError("grid must be a GridSpec")
        self.n_cells_ = self.grid.n_cells
        return self

    def transform(self, X) -> CsrBoolMatrix:
        from .abstraction import FootprintSpec, TransitionSystem, sweep_samples, sweep_system

        check_is_fitted(self, "n_cells_")
        if isinstance(X, TransitionSystem):
            return sweep_system(X, self.footprint, self.grid)
        return sweep_samples(np.asarray(X), self.footprint or FootprintSpec(), self.grid)
