"""Compressed row storage matrices and the row-range SpMV kernel.

Everything downstream (level construction, scheduling, the MPK executor)
operates on square ``CsrMatrix`` objects in canonical form: column indices
strictly increasing within each row, no structural duplicates, 32-bit
indices.  Matrices are immutable after construction and safe to share
between threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .backend import USING_NUMBA

INDEX_DTYPE = np.int32
VALUE_DTYPE = np.float64

#: Matrices beyond this many nonzeros would overflow 32-bit row pointers.
MAX_NNZ = 2**31 - 1


class CsrMatrix:
    """Square sparse matrix in CRS form (row_ptr / col / val)."""

    __slots__ = ("n_rows", "row_ptr", "col", "val")

    def __init__(self, n_rows, row_ptr, col, val, check=True):
        self.n_rows = int(n_rows)
        row_ptr = np.asarray(row_ptr)
        if row_ptr.size and int(row_ptr[-1]) > MAX_NNZ:
            raise ValueError(
                f"matrix has {int(row_ptr[-1])} nonzeros, exceeding the 32-bit index limit"
            )
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=INDEX_DTYPE)
        self.col = np.ascontiguousarray(col, dtype=INDEX_DTYPE)
        self.val = np.ascontiguousarray(val, dtype=VALUE_DTYPE)
        if check:
            self._validate()

    @property
    def n_nz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def _validate(self):
        n = self.n_rows
        if self.row_ptr.shape != (n + 1,):
            raise ValueError(f"row_ptr must have {n + 1} entries, got {self.row_ptr.shape}")
        if self.row_ptr[0] != 0:
            raise ValueError("row_ptr[0] must be 0")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        nnz = int(self.row_ptr[-1])
        if self.col.shape != (nnz,) or self.val.shape != (nnz,):
            raise ValueError("col/val length must equal row_ptr[-1]")
        if nnz and (self.col.min() < 0 or self.col.max() >= n):
            raise ValueError("column index out of range (matrix must be square)")
        # canonical form: strictly increasing columns inside each row
        dc = np.diff(self.col)
        row_starts = self.row_ptr[1:-1]
        inner = np.ones(max(nnz - 1, 0), dtype=bool)
        inner[row_starts[row_starts < nnz] - 1] = False  # row transitions exempt
        if np.any(dc[inner] <= 0):
            raise ValueError("columns must be strictly increasing within each row")

    # -- construction ----------------------------------------------------

    @classmethod
    def from_triplets(cls, n_rows, rows, cols, vals, sum_duplicates=True):
        """Build a canonical matrix from COO triplets (duplicates are summed)."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=VALUE_DTYPE)
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_rows):
            raise ValueError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if sum_duplicates and rows.size:
            key_new = np.empty(rows.size, dtype=bool)
            key_new[0] = True
            key_new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(key_new)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(n_rows, row_ptr, cols, vals)

    def to_triplets(self):
        rows = np.repeat(np.arange(self.n_rows, dtype=INDEX_DTYPE), self.row_nnz)
        return rows, self.col.copy(), self.val.copy()

    def to_dense(self) -> np.ndarray:
        """Dense copy; intended for small matrices (oracles, inspection)."""
        d = np.zeros((self.n_rows, self.n_rows))
        rows, cols, vals = self.to_triplets()
        d[rows, cols] = vals
        return d

    def diagonal(self) -> np.ndarray:
        rows, cols, vals = self.to_triplets()
        d = np.zeros(self.n_rows)
        on = rows == cols
        d[rows[on]] = vals[on]
        return d

    def __eq__(self, other):
        return (
            isinstance(other, CsrMatrix)
            and self.n_rows == other.n_rows
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col, other.col)
            and np.array_equal(self.val, other.val)
        )

    def __repr__(self):
        return f"CsrMatrix(n_rows={self.n_rows}, n_nz={self.n_nz})"


@dataclass(frozen=True)
class Permutation:
    """Symmetric reordering: ``perm`` maps new index -> old, ``inv_perm`` old -> new."""

    perm: np.ndarray
    inv_perm: np.ndarray = field(default=None)

    def __post_init__(self):
        perm = np.ascontiguousarray(self.perm, dtype=INDEX_DTYPE)
        object.__setattr__(self, "perm", perm)
        n = perm.shape[0]
        if self.inv_perm is None:
            inv = np.empty(n, dtype=INDEX_DTYPE)
            inv[perm] = np.arange(n, dtype=INDEX_DTYPE)
            object.__setattr__(self, "inv_perm", inv)
        else:
            object.__setattr__(
                self, "inv_perm", np.ascontiguousarray(self.inv_perm, dtype=INDEX_DTYPE)
            )
        if not np.array_equal(self.perm[self.inv_perm], np.arange(n)):
            raise ValueError("perm and inv_perm are not mutual inverses")

    @property
    def n(self) -> int:
        return self.perm.shape[0]

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=INDEX_DTYPE)
        return cls(idx, idx.copy())

    def apply_to_vector(self, v: np.ndarray) -> np.ndarray:
        """Reorder a vector into the new numbering: out[new] = v[old]."""
        return np.asarray(v)[self.perm]

    def undo_on_vector(self, v_permuted: np.ndarray) -> np.ndarray:
        """Recover the original ordering: out[old] = v_permuted[new]."""
        out = np.empty_like(np.asarray(v_permuted))
        out[self.perm] = v_permuted
        return out


def permute_symmetric(a: CsrMatrix, perm: Permutation) -> CsrMatrix:
    """Apply a symmetric permutation: B[i, j] = A[perm[i], perm[j]]."""
    if perm.n != a.n_rows:
        raise ValueError(f"permutation length {perm.n} != n_rows {a.n_rows}")
    p = perm.perm.astype(np.int64)
    counts = (a.row_ptr[p + 1] - a.row_ptr[p]).astype(np.int64)
    new_ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=new_ptr[1:])
    nnz = a.n_nz
    # gather source slot for every destination slot
    gather = np.arange(nnz, dtype=np.int64)
    gather -= np.repeat(new_ptr[:-1], counts)
    gather += np.repeat(a.row_ptr[p].astype(np.int64), counts)
    new_col = perm.inv_perm[a.col[gather]].astype(np.int64)
    new_val = a.val[gather]
    # restore canonical column order inside each row
    row_of = np.repeat(np.arange(a.n_rows, dtype=np.int64), counts)
    order = np.lexsort((new_col, row_of))
    return CsrMatrix(a.n_rows, new_ptr, new_col[order], new_val[order])


# -- SpMV on a row range -------------------------------------------------

if USING_NUMBA:
    from numba import njit

    @njit(nogil=True, cache=True)
    def _spmv_rows_kernel(row_ptr, col, val, x, out, row_start, row_end):
        for r in range(row_start, row_end):
            tmp = 0.0
            for k in range(row_ptr[r], row_ptr[r + 1]):
                tmp += val[k] * x[col[k]]
            out[r] = tmp


def _spmv_rows_numpy(row_ptr, col, val, x, out, row_start, row_end):
    if row_end <= row_start:
        return
    lo = int(row_ptr[row_start])
    hi = int(row_ptr[row_end])
    prod = val[lo:hi] * x[col[lo:hi]]
    seg = row_ptr[row_start:row_end].astype(np.int64) - lo
    nnzs = np.diff(row_ptr[row_start : row_end + 1])
    if prod.size:
        sums = np.add.reduceat(prod, np.minimum(seg, prod.size - 1))
    else:
        sums = np.zeros(row_end - row_start)
    sums[nnzs == 0] = 0.0  # reduceat yields a stray element for empty segments
    out[row_start:row_end] = sums


def spmv_rows(a: CsrMatrix, x, out, row_start, row_end):
    """out[r] = sum_k val[k] * x[col[k]] for rows in [row_start, row_end).

    Rows outside the range are untouched.  Per-row summation follows CRS
    storage order under the numba backend; the numpy backend is segment-wise
    deterministic.  Either way the result is a pure function of the inputs.
    No internal parallelism: callers partition rows, and concurrent calls
    are safe exactly when their output row ranges are disjoint.
    """
    if USING_NUMBA:
        _spmv_rows_kernel(a.row_ptr, a.col, a.val, x, out, row_start, row_end)
    else:
        _spmv_rows_numpy(a.row_ptr, a.col, a.val, x, out, row_start, row_end)


def spmv_range(a: CsrMatrix, in_vec, out_vec, row_start, row_end):
    """SpMV restricted to rows [row_start, row_end], bounds inclusive.

    ``in_vec`` and ``out_vec`` must be distinct length-n vectors; rows outside
    the range keep their previous contents.
    """
    in_vec = np.asarray(in_vec)
    out_vec = np.asarray(out_vec)
    if in_vec.shape != (a.n_rows,) or out_vec.shape != (a.n_rows,):
        raise ValueError("vector length must equal n_rows")
    if np.shares_memory(in_vec, out_vec):
        raise ValueError("in_vec and out_vec must not alias")
    if not (0 <= row_start <= row_end < a.n_rows):
        raise ValueError(f"row range [{row_start}, {row_end}] out of bounds for n={a.n_rows}")
    spmv_rows(a, in_vec, out_vec, int(row_start), int(row_end) + 1)
