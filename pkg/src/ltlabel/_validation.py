"""Small input checks shared by the public entry points."""

from __future__ import annotations

import numbers

import numpy as np


def check_probability(p, name: str, *, allow_zero: bool = False) -> float:
    if not isinstance(p, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    p = float(p)
    lo_ok = p >= 0 if allow_zero else p > 0
    if not (lo_ok and p <= 1):
        raise ValueError(f"{name} must lie in {'[0' if allow_zero else '(0'}, 1], got {p}")
    return p


def check_positive_int(n, name: str) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(n).__name__}")
    if n <= 0:
        raise ValueError(f"{name} must be positive, got {n}")
    return int(n)


def check_csr_arrays(row_offsets, col_indices, n_cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate and normalise CSR arrays; indices must be sorted and unique per row."""
    offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
    # 32-bit indices halve the streamed bytes whenever the column count allows
    idx_type = np.int32 if n_cols <= 2**31 else np.int64
    indices = np.asarray(col_indices)
    if indices.size and (indices.min() < 0 or indices.max() >= n_cols):
        raise ValueError(f"column index out of range for {n_cols} columns")
    indices = np.ascontiguousarray(indices, dtype=idx_type)
    if offsets.ndim != 1 or offsets.size == 0:
        raise ValueError("row_offsets must be a nonempty 1-D array")
    if offsets[0] != 0 or offsets[-1] != indices.size:
        raise ValueError(f"row_offsets must start at 0 and end at nnz={indices.size}")
    if np.any(np.diff(offsets) < 0):
        raise ValueError("row_offsets must be nondecreasing")
    if indices.size:
        step = np.diff(indices)
        starts = np.zeros(indices.size, dtype=bool)
        starts[offsets[:-1][offsets[:-1] < indices.size]] = True
        if np.any((step <= 0) & ~starts[1:]):
            raise ValueError("column indices must be strictly increasing within each row")
    return offsets, indices


def check_shapes(lhs_cols: int, rhs_rows: int, what: str = "product") -> None:
    if lhs_cols != rhs_rows:
        raise ValueError(f"dimension mismatch in {what}: left has {lhs_cols} columns, right has {rhs_rows} rows")
