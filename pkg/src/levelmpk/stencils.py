"""Synthetic stencil matrices used throughout the test corpus.

Two families:

* a 2d seven-point stencil on an nx-by-ny grid (self, the four axis
  neighbors, and the two antidiagonal neighbors), values 7 on the diagonal
  and -1 off it;
* negative-Laplace finite-difference operators of order 2/4/6 on an n^3
  grid with unit spacing and Dirichlet truncation at the boundary (rows
  near the boundary simply have fewer neighbors).

Vertices are numbered lexicographically in both cases.
"""

import numpy as np

from .csr import CsrMatrix

# second derivative weights for -d2/dx2, per spatial order
_FD_WEIGHTS = {
    2: {0: 2.0, 1: -1.0},
    4: {0: 5.0 / 2.0, 1: -4.0 / 3.0, 2: 1.0 / 12.0},
    6: {0: 49.0 / 18.0, 1: -3.0 / 2.0, 2: 3.0 / 20.0, 3: -1.0 / 90.0},
}

# 2d-7pt couplings: the two diagonal partners lie on the antidiagonal,
# which keeps breadth-first levels equal to the grid antidiagonals.
_OFFSETS_2D7PT = [(-1, 0), (1, 0), (0, -1), (0, 1), (1, -1), (-1, 1)]


def gen_stencil_2d7pt(nx: int, ny: int) -> CsrMatrix:
    """2d seven-point stencil matrix on an nx-by-ny grid."""
    if nx < 2 or ny < 2:
        raise ValueError(f"grid dimensions must be >= 2, got ({nx}, {ny})")
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ix = ix.ravel()
    iy = iy.ravel()
    ids = ix * ny + iy
    rows = [ids]
    cols = [ids]
    vals = [np.full(ids.size, 7.0)]
    for dx, dy in _OFFSETS_2D7PT:
        jx, jy = ix + dx, iy + dy
        ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
        rows.append(ids[ok])
        cols.append(jx[ok] * ny + jy[ok])
        vals.append(np.full(int(ok.sum()), -1.0))
    return CsrMatrix.from_triplets(
        nx * ny, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


def gen_stencil_3d(n: int, order: int = 2) -> CsrMatrix:
    """Finite-difference -Laplacian of the given spatial order on an n^3 grid."""
    if order not in _FD_WEIGHTS:
        raise ValueError(f"unsupported spatial order {order} (choose 2, 4, or 6)")
    if n < order + 1:
        raise ValueError(f"grid size {n} too small for order {order} (need n >= {order + 1})")
    w = _FD_WEIGHTS[order]
    x, y, z = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    coords = [x.ravel(), y.ravel(), z.ravel()]
    ids = (coords[0] * n + coords[1]) * n + coords[2]
    rows = [ids]
    cols = [ids]
    vals = [np.full(ids.size, 3.0 * w[0])]
    for axis in range(3):
        for k, wk in w.items():
            if k == 0:
                continue
            for sign in (-1, 1):
                j = coords[axis] + sign * k
                ok = (j >= 0) & (j < n)
                jc = [c.copy() for c in coords]
                jc[axis] = j
                rows.append(ids[ok])
                cols.append(((jc[0] * n + jc[1]) * n + jc[2])[ok])
                vals.append(np.full(int(ok.sum()), wk))
    return CsrMatrix.from_triplets(
        n**3, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


def stencil_3d_nnz(n: int, order: int = 2) -> int:
    """Closed-form nonzero count of gen_stencil_3d (Dirichlet truncation)."""
    if order not in _FD_WEIGHTS:
        raise ValueError(f"unsupported spatial order {order}")
    half = order // 2
    # per axis: n self-couplings plus 2*(n - k) pairs at distance k
    per_axis = n + 2 * sum(n - k for k in range(1, half + 1))
    # couplings only along axes: total = n^3 + 3 * n^2 * (per_axis - n)
    return n**3 + 3 * n**2 * (per_axis - n)
