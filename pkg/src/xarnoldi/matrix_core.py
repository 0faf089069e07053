"""Sparse CSR storage, counted matrix-vector products and test matrices.

Everything downstream treats the operator as an opaque :class:`SparseMatrix`
and only touches it through :func:`matvec`, so the number of products a
solver spends is exactly what a :class:`MatvecCounter` records.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SparseMatrix",
    "MatvecCounter",
    "ZeroVectorError",
    "MatrixMarketError",
    "MalformedHeaderError",
    "MalformedEntryError",
    "NonSquareMatrixError",
    "IndexOutOfRangeError",
    "UnsupportedFieldError",
    "UnsupportedFormatError",
    "matvec",
    "normalize",
    "read_matrix_market",
    "load_matrix_market",
    "make_alternating_diag",
    "make_inverse_iota_diag",
]


class ZeroVectorError(ValueError):
    """Raised when a vector with zero norm must be normalized."""


class MatrixMarketError(ValueError):
    """Base class for Matrix Market parsing failures."""


class MalformedHeaderError(MatrixMarketError):
    pass


class MalformedEntryError(MatrixMarketError):
    pass


class NonSquareMatrixError(MatrixMarketError):
    pass


class IndexOutOfRangeError(MatrixMarketError):
    pass


class UnsupportedFieldError(MatrixMarketError):
    """The file stores ``complex`` (or another unsupported) values."""


class UnsupportedFormatError(MatrixMarketError):
    """The file is in ``array`` layout or uses an unsupported symmetry."""


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square real matrix in compressed sparse row form.

    Instances are immutable after construction; use :meth:`from_triplets`
    or :meth:`diagonal` rather than filling the arrays by hand.
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _row_ids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        n = int(self.n)
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        if offsets.shape != (n + 1,):
            raise ValueError("row_offsets must have length n + 1")
        if offsets[0] != 0 or np.any(np.diff(offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be non-decreasing")
        if cols.shape != vals.shape or offsets[-1] != cols.size:
            raise ValueError("row_offsets[n] must equal the number of stored entries")
        if cols.size and (cols.min() < 0 or cols.max() >= n):
            raise ValueError("column index out of range")
        row_ids = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
        # strictly increasing columns inside each row (no duplicates)
        same_row = row_ids[1:] == row_ids[:-1]
        if np.any(same_row & (cols[1:] <= cols[:-1])):
            raise ValueError("column indices must be strictly increasing within each row")
        for arr in (offsets, cols, vals, row_ids):
            arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_row_ids", row_ids)

    @property
    def nnz(self) -> int:
        return int(self.col_indices.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @classmethod
    def from_triplets(cls, n, rows, cols, vals) -> "SparseMatrix":
        """Assemble from 0-based coordinates; duplicate pairs are summed."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValueError("triplet index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            start = np.ones(rows.size, dtype=bool)
            start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(start) - 1
            vals = np.bincount(group, weights=vals, minlength=int(start.sum()))
            rows, cols = rows[start], cols[start]
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(n, offsets, cols, vals)

    @classmethod
    def diagonal(cls, diag) -> "SparseMatrix":
        diag = np.asarray(diag, dtype=np.float64).ravel()
        n = diag.size
        return cls(n, np.arange(n + 1), np.arange(n), diag)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        dense[self._row_ids, self.col_indices] = self.values
        return dense

    def diagonal_values(self) -> np.ndarray:
        d = np.zeros(self.n)
        mask = self._row_ids == self.col_indices
        d[self._row_ids[mask]] = self.values[mask]
        return d

    def is_diagonal(self) -> bool:
        return bool(np.all(self.values[self._row_ids != self.col_indices] == 0.0))

    def is_symmetric(self, rtol: float = 0.0) -> bool:
        transposed = SparseMatrix.from_triplets(self.n, self.col_indices, self._row_ids, self.values)
        if not np.array_equal(transposed.row_offsets, self.row_offsets):
            return False
        if not np.array_equal(transposed.col_indices, self.col_indices):
            return False
        scale = np.abs(self.values).max(initial=0.0)
        return bool(np.all(np.abs(transposed.values - self.values) <= rtol * scale))

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


class MatvecCounter:
    """Tally of matrix-vector products; owned by one solve at a time."""

    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = count

    def increment(self, by: int = 1) -> None:
        self.count += by

    def __repr__(self):
        return f"MatvecCounter(count={self.count})"


def matvec(A: SparseMatrix, x, counter: MatvecCounter | None = None) -> np.ndarray:
    """Return ``A @ x`` and bump ``counter`` by one."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has shape {x.shape}")
    out = np.bincount(A._row_ids, weights=A.values * x[A.col_indices], minlength=A.n)
    if counter is not None:
        counter.count += 1
    return out


def normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    nrm = np.linalg.norm(x)
    if not nrm > 0.0 or not np.isfinite(nrm):
        raise ZeroVectorError("cannot normalize a zero (or non-finite) vector")
    return x / nrm


# ---------------------------------------------------------------------------
# Matrix Market


_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric"}


def read_matrix_market(stream) -> SparseMatrix:
    """Parse a Matrix Market ``coordinate`` file into CSR.

    ``symmetric`` storage is expanded by mirroring off-diagonal entries,
    ``pattern`` entries get the value 1.0 and repeated coordinates are
    summed. Each class of problem raises its own :class:`MatrixMarketError`
    subclass.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline()
    tokens = header.strip().split()
    if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
        raise MalformedHeaderError(f"not a Matrix Market header: {header.strip()!r}")
    obj, fmt, fld, sym = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise MalformedHeaderError(f"unsupported object {obj!r}")
    if fmt == "array":
        raise UnsupportedFormatError("dense 'array' layout is not supported")
    if fmt != "coordinate":
        raise MalformedHeaderError(f"unknown format {fmt!r}")
    if fld == "complex":
        raise UnsupportedFieldError("complex matrices are not supported")
    if fld not in _FIELDS:
        raise UnsupportedFieldError(f"unsupported field {fld!r}")
    if sym not in _SYMMETRIES:
        raise UnsupportedFormatError(f"unsupported symmetry {sym!r}")

    size_line = None
    for line in stream:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        size_line = s
        break
    if size_line is None:
        raise MalformedHeaderError("missing size line")
    try:
        nrows, ncols, nnz = (int(t) for t in size_line.split())
    except ValueError:
        raise MalformedHeaderError(f"bad size line: {size_line!r}") from None
    if nrows != ncols:
        raise NonSquareMatrixError(f"matrix is {nrows}x{ncols}, expected square")
    if nrows < 1 or nnz < 0:
        raise MalformedHeaderError(f"bad size line: {size_line!r}")

    body = [ln for ln in stream.read().splitlines() if ln.strip() and not ln.lstrip().startswith("%")]
    width = 2 if fld == "pattern" else 3
    if len(body) != nnz:
        raise MalformedEntryError(f"expected {nnz} entries, found {len(body)}")
    try:
        data = np.array(" ".join(body).split(), dtype=np.float64)
    except ValueError:
        raise MalformedEntryError("non-numeric entry") from None
    if data.size != nnz * width:
        raise MalformedEntryError(f"each entry must have {width} fields")
    data = data.reshape(nnz, width)
    idx = data[:, :2]
    if np.any(idx != np.round(idx)):
        raise MalformedEntryError("non-integer index")
    rows = idx[:, 0].astype(np.int64) - 1
    cols = idx[:, 1].astype(np.int64) - 1
    bad = (rows < 0) | (rows >= nrows) | (cols < 0) | (cols >= ncols)
    if np.any(bad):
        line_no = int(np.argmax(bad))
        raise IndexOutOfRangeError(
            f"entry {line_no + 1} ({rows[line_no] + 1}, {cols[line_no] + 1}) outside {nrows}x{ncols}"
        )
    vals = np.ones(nnz) if fld == "pattern" else data[:, 2]

    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return SparseMatrix.from_triplets(nrows, rows, cols, vals)


def load_matrix_market(path: str | os.PathLike) -> SparseMatrix:
    with open(path, "r") as fh:
        return read_matrix_market(fh)


# ---------------------------------------------------------------------------
# synthetic operators


def make_alternating_diag(n: int) -> SparseMatrix:
    """``diag(n, -(n-1), n-2, ..., ±1)``: entry ``i`` is ``(-1)**i * (n - i)``."""
    if n < 1:
        raise ValueError("n must be positive")
    i = np.arange(n)
    return SparseMatrix.diagonal(np.where(i % 2 == 0, 1.0, -1.0) * (n - i))


def make_inverse_iota_diag(n: int, variant: str = "i_over_n") -> SparseMatrix:
    """Diagonal with ``a_ii = n/i`` (``"n_over_i"``) or ``a_ii = i/n`` (``"i_over_n"``), i = 1..n.

    Only ``i_over_n`` has largest eigenvalue 1 and second largest ``1 - 1/n``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    i = np.arange(1, n + 1, dtype=np.float64)
    if variant == "n_over_i":
        return SparseMatrix.diagonal(n / i)
    if variant == "i_over_n":
        return SparseMatrix.diagonal(i / n)
    raise ValueError(f"unknown variant {variant!r}; expected 'n_over_i' or 'i_over_n'")
