"""Matrix Market coordinate-format reader and writer.

Supports the subset needed here: coordinate format, real/integer/pattern
fields, general or symmetric storage, square matrices.  Symmetric files are
expanded to full storage, pattern entries get the value 1.0, duplicate
coordinates are summed, and rows come out sorted by column.
"""

import numpy as np

from .csr import CsrMatrix


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input; message carries the offending line number."""


def _fail(path, lineno, msg):
    raise MatrixMarketError(f"{path}:{lineno}: {msg}")


def load_matrix_market(path) -> CsrMatrix:
    """Read a coordinate-format Matrix Market file into a canonical CsrMatrix."""
    path = str(path)
    with open(path, "r") as fh:
        lines = fh.readlines()
    if not lines:
        _fail(path, 1, "empty file")

    header = lines[0].strip().split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        _fail(path, 1, f"malformed header {lines[0].strip()!r}")
    _, obj, fmt, field, symmetry = (tok.lower() for tok in header)
    if obj != "matrix" or fmt != "coordinate":
        _fail(path, 1, f"only 'matrix coordinate' files are supported, got {obj} {fmt}")
    if field not in ("real", "integer", "pattern"):
        _fail(path, 1, f"unsupported field {field!r} (real, integer, or pattern)")
    if symmetry not in ("general", "symmetric"):
        _fail(path, 1, f"unsupported symmetry {symmetry!r} (general or symmetric)")
    pattern = field == "pattern"

    # locate the size line, skipping comments
    size_idx = None
    for i in range(1, len(lines)):
        if not lines[i].lstrip().startswith("%") and lines[i].strip():
            size_idx = i
            break
    if size_idx is None:
        _fail(path, len(lines), "missing size line")
    parts = lines[size_idx].split()
    if len(parts) != 3:
        _fail(path, size_idx + 1, f"size line must be 'rows cols nnz', got {lines[size_idx].strip()!r}")
    try:
        n_rows, n_cols, n_entries = (int(tok) for tok in parts)
    except ValueError:
        _fail(path, size_idx + 1, f"non-integer size line {lines[size_idx].strip()!r}")
    if n_rows != n_cols:
        raise MatrixMarketError(
            f"{path}: matrix is {n_rows}x{n_cols}; only square matrices are supported"
        )

    rows = np.empty(n_entries, dtype=np.int64)
    cols = np.empty(n_entries, dtype=np.int64)
    vals = np.empty(n_entries, dtype=np.float64)
    want = 2 if pattern else 3
    k = 0
    for i in range(size_idx + 1, len(lines)):
        line = lines[i].strip()
        if not line or line.startswith("%"):
            continue
        if k >= n_entries:
            _fail(path, i + 1, f"more than the declared {n_entries} entries")
        parts = line.split()
        if len(parts) < want:
            _fail(path, i + 1, f"expected {want} fields, got {len(parts)}")
        try:
            r = int(parts[0])
            c = int(parts[1])
            v = 1.0 if pattern else float(parts[2])
        except ValueError:
            _fail(path, i + 1, f"could not parse entry {line!r}")
        if not (1 <= r <= n_rows) or not (1 <= c <= n_cols):
            _fail(path, i + 1, f"index ({r}, {c}) out of range for {n_rows}x{n_cols} matrix")
        rows[k], cols[k], vals[k] = r - 1, c - 1, v
        k += 1
    if k != n_entries:
        _fail(path, len(lines), f"expected {n_entries} entries, found {k}")

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
        )
        vals = np.concatenate([vals, vals[off]])
    return CsrMatrix.from_triplets(n_rows, rows, cols, vals)


def save_matrix_market(a: CsrMatrix, path, comment=None):
    """Write a CsrMatrix as 'coordinate real general' with 1-based indices."""
    rows, cols, vals = a.to_triplets()
    with open(str(path), "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{a.n_rows} {a.n_rows} {a.n_nz}\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{r + 1} {c + 1} {float(v)!r}\n")
