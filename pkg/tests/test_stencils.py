import numpy as np
import pytest

from levelmpk import gen_stencil_2d7pt, gen_stencil_3d, stencil_3d_nnz


def test_2d7pt_8x8_shape_and_vertex_54():
    a = gen_stencil_2d7pt(8, 8)
    assert a.n_rows == 64
    # neighborhood of vertex 54 = (6, 6): self, four axis neighbors, and
    # the two antidiagonal partners
    row = a.col[a.row_ptr[54] : a.row_ptr[55]].tolist()
    assert sorted(row) == sorted([54, 46, 62, 53, 55, 47, 61])
    diag = a.to_dense()
    assert diag[54, 54] == 7.0
    assert diag[54, 53] == -1.0


def test_2d7pt_2x2_brute_force():
    a = gen_stencil_2d7pt(2, 2)
    # enumerate by hand-applying the stencil footprint on the 2x2 grid:
    # (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3; antidiagonal couples 1 and 2 only
    expect = np.array(
        [
            [7, -1, -1, 0],
            [-1, 7, -1, -1],
            [-1, -1, 7, -1],
            [0, -1, -1, 7],
        ],
        dtype=float,
    )
    assert np.array_equal(a.to_dense(), expect)


@pytest.mark.parametrize("nx,ny", [(2, 2), (3, 5), (8, 8), (4, 9)])
def test_2d7pt_structurally_symmetric(nx, ny):
    a = gen_stencil_2d7pt(nx, ny)
    d = a.to_dense()
    assert np.array_equal(d != 0, d.T != 0)


def test_2d7pt_rejects_tiny_grid():
    with pytest.raises(ValueError, match=">= 2"):
        gen_stencil_2d7pt(1, 8)


def test_3d_interior_row_has_7_nonzeros():
    a = gen_stencil_3d(4, 2)
    interior = (1 * 4 + 1) * 4 + 1
    assert a.row_nnz[interior] == 7


@pytest.mark.parametrize("order,count", [(2, 7), (4, 13), (6, 19)])
def test_3d_interior_counts_per_order(order, count):
    n = 8
    a = gen_stencil_3d(n, order)
    mid = (n // 2 * n + n // 2) * n + n // 2
    assert a.row_nnz[mid] == count


def test_3d_row_sums_vanish_in_interior():
    # the operator annihilates constants away from the Dirichlet boundary
    n, order = 8, 4
    a = gen_stencil_3d(n, order)
    ones = np.ones(a.n_rows)
    out = a.to_dense() @ ones
    half = order // 2
    idx = np.arange(a.n_rows)
    x, y, z = idx // (n * n), (idx // n) % n, idx % n
    interior = (
        (x >= half) & (x < n - half) & (y >= half) & (y < n - half)
        & (z >= half) & (z < n - half)
    )
    assert np.max(np.abs(out[interior])) < 1e-12


@pytest.mark.parametrize("n,order", [(4, 2), (8, 2), (6, 4), (8, 4), (8, 6), (12, 6)])
def test_3d_nnz_formula_matches_generator(n, order):
    assert gen_stencil_3d(n, order).n_nz == stencil_3d_nnz(n, order)


def test_3d_160_matches_reported_size():
    # validated against the generator at small n above; the 160^3 instance
    # has 4,096,000 rows and 28,518,400 nonzeros (about 6.96 per row)
    n_rows = 160**3
    nnz = stencil_3d_nnz(160, 2)
    assert n_rows == 4_096_000
    assert nnz == 28_518_400
    assert abs(nnz / n_rows - 6.96) < 0.01


def test_3d_structurally_symmetric():
    a = gen_stencil_3d(8, 6)
    d = a.to_dense()
    assert np.array_equal(d, d.T)


def test_3d_rejects_bad_order_and_size():
    with pytest.raises(ValueError, match="unsupported spatial order"):
        gen_stencil_3d(8, 3)
    with pytest.raises(ValueError, match="too small"):
        gen_stencil_3d(4, 4)
