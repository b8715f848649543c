import numpy as np
import pytest

from levelmpk import (
    CacheModel,
    build_baseline_plan,
    build_plan,
    gen_stencil_3d,
    prepare,
    roofline_estimate,
    simulate_traffic,
)
from levelmpk.traffic import _sim_python


def test_zero_capacity_exact_matrix_bytes():
    a = gen_stencil_3d(8, 2)
    for p_m in (1, 3):
        plan = build_baseline_plan(a, p_m, 1)
        rep = simulate_traffic(plan, CacheModel(0))
        assert rep.matrix_bytes == p_m * 12 * a.n_nz  # 12 bytes per nonzero per sweep
        assert rep.row_ptr_bytes == p_m * 4 * a.n_rows


def test_huge_cache_cold_misses_only():
    a = gen_stencil_3d(8, 2)
    plan = build_baseline_plan(a, 4, 1)
    rep = simulate_traffic(plan, CacheModel(1 << 30))
    # compulsory misses: one line fetch per val/col line, ~12 bytes per nnz
    assert abs(rep.matrix_bytes - 12 * a.n_nz) <= 2 * 64
    assert rep.by_power[2:, 0].sum() == 0  # everything after power 1 hits


def test_lru_monotone_in_capacity():
    a = gen_stencil_3d(8, 2)
    pre = prepare(a, "lb_lg_p2p", 4, 6_000)
    plan = build_plan(pre, "lb_lg_p2p", 1)
    sizes = [0, 4_096, 16_384, 65_536, 1 << 20, 1 << 26]
    totals = [simulate_traffic(plan, CacheModel(s)).total_bytes for s in sizes]
    assert totals == sorted(totals, reverse=True)


def test_baseline_traffic_is_pm_times_single_sweep():
    a = gen_stencil_3d(12, 2)
    matrix_bytes = 12 * a.n_nz + 4 * (a.n_rows + 1)
    cache = CacheModel(matrix_bytes // 3)  # smaller than half the matrix
    one = simulate_traffic(build_baseline_plan(a, 1, 1), cache).matrix_bytes
    for p_m in (2, 4):
        rep = simulate_traffic(build_baseline_plan(a, p_m, 1), cache)
        assert rep.matrix_bytes == p_m * one


def test_lb_traffic_nonincreasing_in_pm():
    # valid grouping required: recursion depth chosen so no group is flagged
    a = gen_stencil_3d(12, 2)
    cache = 100_000
    balances = []
    for p_m in (1, 2, 4, 8):
        pre = prepare(a, "lb_lg_p2p_rec", p_m, cache, s_m=4)
        assert not pre.flagged_leaves()
        plan = build_plan(pre, "lb_lg_p2p_rec", 1)
        balances.append(simulate_traffic(plan, CacheModel(cache)).matrix_code_balance)
    assert all(b1 >= b2 - 1e-12 for b1, b2 in zip(balances, balances[1:]))


def test_conservation_and_breakdown():
    a = gen_stencil_3d(8, 2)
    plan = build_baseline_plan(a, 3, 1)
    rep = simulate_traffic(plan, CacheModel(10_000))
    assert rep.total_bytes == rep.matrix_bytes + rep.row_ptr_bytes + rep.vector_bytes
    assert rep.by_power[:, 0].sum() == rep.matrix_bytes
    assert rep.by_power[:, 1].sum() == rep.row_ptr_bytes
    assert rep.by_power[:, 2].sum() == rep.vector_bytes
    assert rep.code_balance == pytest.approx(rep.total_bytes / (2 * a.n_nz * 3))


def test_hit_miss_accounting():
    a = gen_stencil_3d(8, 2)
    plan = build_baseline_plan(a, 2, 1)
    rep = simulate_traffic(plan, CacheModel(10_000))
    assert rep.n_accesses == 2 * (2 * a.n_rows + 3 * a.n_nz)
    assert rep.n_misses >= 0 and rep.n_hits >= 0
    assert rep.n_misses + rep.n_hits == rep.n_accesses
    # no-cache mode: every access misses
    rep0 = simulate_traffic(plan, CacheModel(0))
    assert rep0.n_misses == rep0.n_accesses and rep0.n_hits == 0


def test_python_and_numba_simulators_agree():
    a = gen_stencil_3d(6, 2)
    pre = prepare(a, "lb_lg_p2p", 3, 4_000)
    plan = build_plan(pre, "lb_lg_p2p", 1)
    for cap in (0, 2_048, 50_000):
        rep = simulate_traffic(plan, CacheModel(cap))
        by_power = _sim_python(
            plan.a.row_ptr, plan.a.col, plan.row_start, plan.row_end, plan.power,
            plan.in_slot, plan.out_slot, plan.a.n_rows,
            int(plan.out_slot.max()) + 1, cap // 64, 64, cap == 0,
        )
        assert by_power[:, 0].sum() + by_power[:, 1].sum() == rep.matrix_bytes
        assert by_power[:, 3].sum() == rep.vector_bytes


def test_roofline_examples():
    assert roofline_estimate(6.0, 116e9) == pytest.approx(19.33e9, rel=1e-3)
    assert roofline_estimate(1.0, 1.0) == 1.0
    assert roofline_estimate(1.5, 116e9) == pytest.approx(77.33e9, rel=1e-3)
    with pytest.raises(ValueError):
        roofline_estimate(0.0, 1.0)
    with pytest.raises(ValueError):
        roofline_estimate(1.0, -5.0)


def test_cache_model_validation():
    with pytest.raises(ValueError):
        CacheModel(-1)
    with pytest.raises(ValueError):
        CacheModel(100, line_bytes=7)
