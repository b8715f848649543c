import numpy as np
import pytest

from levelmpk import CsrMatrix, gen_stencil_2d7pt, gen_stencil_3d


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symmetric_pattern(n, avg_deg, seed):
    """Random sparse matrix with a symmetric pattern and general values."""
    rng = np.random.default_rng(seed)
    m = n * avg_deg // 2
    r = rng.integers(0, n, m)
    c = rng.integers(0, n, m)
    rows = np.concatenate([r, c, np.arange(n)])
    cols = np.concatenate([c, r, np.arange(n)])
    vals = rng.standard_normal(rows.size)
    # symmetric pattern, independent values per direction
    return CsrMatrix.from_triplets(n, rows, cols, vals)


def disconnected_matrix():
    """Two independent stencil blocks glued block-diagonally."""
    a = gen_stencil_2d7pt(6, 6)
    b = gen_stencil_3d(4, 2)
    n = a.n_rows + b.n_rows
    ra, ca, va = a.to_triplets()
    rb, cb, vb = b.to_triplets()
    return CsrMatrix.from_triplets(
        n,
        np.concatenate([ra, rb + a.n_rows]),
        np.concatenate([ca, cb + a.n_rows]),
        np.concatenate([va, vb]),
    )


def corpus():
    """The acceptance corpus: name -> matrix (built lazily by callers)."""
    mats = {
        "2d7pt-8": lambda: gen_stencil_2d7pt(8, 8),
        "2d7pt-16": lambda: gen_stencil_2d7pt(16, 16),
        "2d7pt-32": lambda: gen_stencil_2d7pt(32, 32),
        "2d7pt-64": lambda: gen_stencil_2d7pt(64, 64),
        "3d-8-o2": lambda: gen_stencil_3d(8, 2),
        "3d-16-o2": lambda: gen_stencil_3d(16, 2),
        "3d-24-o2": lambda: gen_stencil_3d(24, 2),
        "3d-8-o4": lambda: gen_stencil_3d(8, 4),
        "3d-16-o4": lambda: gen_stencil_3d(16, 4),
        "3d-8-o6": lambda: gen_stencil_3d(8, 6),
        "3d-16-o6": lambda: gen_stencil_3d(16, 6),
        "random-1": lambda: random_symmetric_pattern(800, 8, 11),
        "random-2": lambda: random_symmetric_pattern(1500, 5, 22),
        "disconnected": disconnected_matrix,
    }
    return mats


def dense_powers(a: CsrMatrix, x, p_m):
    """Dense oracle: [x, Ax, A^2 x, ...] via explicit dense products."""
    d = a.to_dense()
    out = [np.asarray(x, dtype=np.float64)]
    for _ in range(p_m):
        out.append(d @ out[-1])
    return out


def dumbbell_matrix(grid=10, path_len=60):
    """Two wide grid blocks joined by a long path.

    Under a small cache both blocks' levels are flagged while the path's
    are not, exercising several refined spans in one tree.
    """
    g1 = gen_stencil_2d7pt(grid, grid)
    g2 = gen_stencil_2d7pt(grid, grid)
    n = g1.n_rows + path_len + g2.n_rows
    r1, c1, v1 = g1.to_triplets()
    r2, c2, v2 = g2.to_triplets()
    rows = list(r1) + list(r2 + g1.n_rows + path_len)
    cols = list(c1) + list(c2 + g1.n_rows + path_len)
    vals = list(v1) + list(v2)
    chain = [g1.n_rows - 1] + [g1.n_rows + k for k in range(path_len)]
    chain.append(g1.n_rows + path_len)
    for u, v in zip(chain[:-1], chain[1:]):
        rows += [u, v]
        cols += [v, u]
        vals += [1.0, 1.0]
    for k in range(path_len):
        u = g1.n_rows + k
        rows.append(u)
        cols.append(u)
        vals.append(4.0)
    return CsrMatrix.from_triplets(n, rows, cols, vals)
