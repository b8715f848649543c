"""Acceptance criteria, one test per criterion, each printing PASS or FAIL.

Criterion 3's p_m=8 leg is a known failure and the assertion is kept as
stated rather than loosened.  On the prescribed instance (3d order-2,
n=32, cache under a quarter of the matrix) no grouping passes the cache
criterion without recursive refinement: the widest BFS level alone needs
a cache beyond the allowed quarter at p_m=8.  With refinement the bound
is still out of reach, for measured reasons: the reordered subgraph
boundaries scatter the vector accesses, and with only ~7 nonzeros per
row the nine live power vectors weigh as much as the matrix window
itself, which the f=0.5 safety factor cannot absorb (the same schedule
simulated at twice the capacity meets the bound).  p_m in {2, 4} pass,
p_m=4 landing at the 1.5 byte/flop the hardware measurements report.
"""

import os
import time

import numpy as np
import pytest

from levelmpk import (
    CacheModel,
    ChebPropagator,
    USING_NUMBA,
    build_baseline_plan,
    build_plan,
    build_schedule,
    cache_criterion_satisfied,
    gen_stencil_2d7pt,
    gen_stencil_3d,
    prepare,
    preprocess,
    reuse_distance,
    run_plan,
    simulate_traffic,
    warmup,
)

from conftest import corpus


def report(criterion, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance criterion {criterion}] {status} {detail}".rstrip())
    assert ok, f"criterion {criterion}: {detail}"


PM_SWEEP = (1, 2, 4, 5, 8)
W_SWEEP = (1, 2, 4, 8)
SM_SWEEP = (0, 1, 2)


def cache_param_for(a):
    """A cache parameter that forces several groups but keeps plans small."""
    return max(12 * a.n_nz // 4, 3_000)


def test_criterion_1_bitwise_equality_across_corpus():
    """All variants, all (p_m, W, s_m): bitwise equal to the baseline."""
    t0 = time.time()
    warmup()
    rng = np.random.default_rng(99)
    checked = 0
    for name, build in corpus().items():
        a = build()
        x = rng.standard_normal(a.n_rows)
        cache = cache_param_for(a)
        for p_m in PM_SWEEP:
            configs = [(v, 0) for v in ("lb", "lb_lg", "lb_lg_p2p")]
            configs += [("lb_lg_p2p_rec", sm) for sm in SM_SWEEP]
            for variant, s_m in configs:
                pre = prepare(a, variant, p_m, cache, s_m=s_m)
                xp = pre.perm.apply_to_vector(x)
                base = run_plan(build_baseline_plan(pre.a, p_m, 1), x=xp)
                for workers in W_SWEEP:
                    res = run_plan(build_plan(pre, variant, workers), x=xp,
                                   timeout=60)
                    for p in range(p_m + 1):
                        assert np.array_equal(res.y[p], base.y[p]), (
                            name, variant, p_m, workers, s_m, p
                        )
                    checked += 1
    elapsed = time.time() - t0
    report(1, elapsed < 300,
           f"({checked} runs bitwise-identical across {len(corpus())} matrices "
           f"in {elapsed:.0f}s, budget 300s)")


def test_criterion_2_structural_goldens():
    a = gen_stencil_2d7pt(8, 8)
    pre = preprocess(a, p_m=5, cache_bytes=1, f=0.5, grouping="levels")
    ok = len(pre.tree.groups) == 15
    sched = build_schedule(pre.tree, 5)
    ok &= len(sched.nodes()) == 75
    n64 = sched.find(6, 4)
    ok &= all(
        sched.find(*dep).exec_step < n64.exec_step
        for dep in ((5, 3), (6, 3), (7, 3))
    )
    order = [(n.group, n.power) for n in sched.nodes()]
    ok &= sorted(order, key=lambda gp: sched.find(*gp).exec_step) == order
    # steady-state reuse distance is p_m + 1, exactly
    mids = range(5, 10)
    ok &= all(reuse_distance(sched, g, 1) == 6 for g in mids)
    report(2, ok, "(15 levels; 75-node diagonal schedule; reuse distance 6)")


def test_criterion_3_traffic_claim_desk_scale():
    t0 = time.time()
    a = gen_stencil_3d(32, 2)
    matrix_bytes = 12 * a.n_nz + 4 * (a.n_rows + 1)
    lines = []
    ok = True
    for p_m, cache, s_m in ((2, 500_000, 0), (4, 690_000, 0), (8, 700_000, 2)):
        assert cache < matrix_bytes / 4
        pre = preprocess(a, p_m=p_m, cache_bytes=cache, f=0.5, s_m=s_m)
        assert not pre.flagged_leaves(), "grouping must satisfy the criterion"
        assert all(cache_criterion_satisfied(g.nnz, p_m, cache, 0.5) for g in pre.leaf_groups())
        plan = build_plan(pre, "lb_lg_p2p_rec", 1)
        lb = simulate_traffic(plan, CacheModel(cache)).matrix_code_balance
        base = simulate_traffic(
            build_baseline_plan(pre.a, p_m, 1), CacheModel(cache)
        ).matrix_code_balance
        bound = 1.25 * 6.0 / p_m
        good = lb <= bound and base >= 0.9 * 6.0
        ok &= good
        lines.append(f"p_m={p_m}: LB {lb:.3f} {'<=' if lb <= bound else '>'} {bound:.3f}, "
                     f"baseline {base:.2f}")
    elapsed = time.time() - t0
    ok &= elapsed < 120
    report(3, ok, "(" + "; ".join(lines) + f"; {elapsed:.0f}s, budget 120s)")


def test_criterion_4_cache_criterion_compliance():
    a = gen_stencil_3d(12, 2)
    cache = 60_000
    pre0 = preprocess(a, p_m=4, cache_bytes=cache, f=0.5, s_m=0)
    flagged_at_0 = len(pre0.flagged_leaves())
    for s_m in range(0, 8):
        pre = preprocess(a, p_m=4, cache_bytes=cache, f=0.5, s_m=s_m)
        if not pre.flagged_leaves():
            break
    clean = not pre.flagged_leaves() and all(
        (4 + 1) * g.nnz * 12 < 0.5 * cache for g in pre.leaf_groups()
    )
    report(4, flagged_at_0 >= 1 and clean,
           f"(s_m=0 flags {flagged_at_0} groups; all leaves comply at s_m={s_m})")


def test_criterion_5_chebyshev_application(rng):
    t0 = time.time()
    a = gen_stencil_3d(8, 2)
    x = rng.standard_normal(a.n_rows)
    dt, tol = 0.05, 1e-4
    w, v = np.linalg.eigh(a.to_dense())
    expect = v @ (np.exp(-dt * w) * (v.T @ x))
    outs = {}
    for pb in (1, 2, 4, 8):
        prop = ChebPropagator(a, dt, tol=tol, p_m_batch=pb,
                              cache_bytes=50_000, workers=2)
        outs[pb] = prop.step(x)
    err = np.linalg.norm(outs[4] - expect) / np.linalg.norm(expect)
    spread = max(
        np.linalg.norm(outs[pb] - outs[1]) / np.linalg.norm(outs[1])
        for pb in (2, 4, 8)
    )
    elapsed = time.time() - t0
    report(5, err <= 10 * tol and spread <= 1e-13 and elapsed < 60,
           f"(expm error {err:.2e} <= {10 * tol:.0e}; batch spread {spread:.1e}; "
           f"{elapsed:.0f}s)")


@pytest.mark.skipif(not USING_NUMBA,
                    reason="timing smoke test exercises the threaded backend")
def test_criterion_6_smoke_benchmark():
    a = gen_stencil_3d(24, 2)
    workers = os.cpu_count() or 1
    warmup()
    x = np.random.default_rng(5).standard_normal(a.n_rows)
    pre = prepare(a, "lb_lg_p2p", 4, 2 * 2**20)
    plan = build_plan(pre, "lb_lg_p2p", workers)
    xp = pre.perm.apply_to_vector(x)
    base_plan = build_baseline_plan(pre.a, 4, workers)

    # interleaved min-of-samples: scheduler noise only ever adds time, so
    # minima estimate what each variant actually costs
    run_plan(base_plan, x=xp)
    run_plan(plan, x=xp)
    t_base = min(run_plan(base_plan, x=xp).seconds for _ in range(40))
    t_p2p = min(run_plan(plan, x=xp).seconds for _ in range(40))
    t_base = min(t_base, min(run_plan(base_plan, x=xp).seconds for _ in range(40)))
    t_p2p = min(t_p2p, min(run_plan(plan, x=xp).seconds for _ in range(40)))
    ratio = t_p2p / t_base
    report(6, ratio <= 1.5,
           f"(lb_lg_p2p {t_p2p*1e3:.2f} ms vs baseline {t_base*1e3:.2f} ms, "
           f"ratio {ratio:.2f} <= 1.5, W={workers})")


@pytest.mark.skipif(not USING_NUMBA,
                    reason="liveness exercises the threaded backend")
def test_criterion_7_liveness_torture():
    t0 = time.time()
    a = gen_stencil_3d(24, 2)  # the largest corpus instance
    rng = np.random.default_rng(13)
    x = rng.standard_normal(a.n_rows)
    pre = prepare(a, "lb_lg_p2p_rec", 8, cache_param_for(a), s_m=2)
    plan = build_plan(pre, "lb_lg_p2p_rec", 8)
    xp = pre.perm.apply_to_vector(x)
    ref = run_plan(plan, x=xp, timeout=60)
    for rep in range(200):
        res = run_plan(plan, x=xp, timeout=60)
        assert all(np.array_equal(ref.y[p], res.y[p]) for p in range(9)), rep
    elapsed = time.time() - t0
    report(7, True, f"(200 repetitions, no deadlock, bitwise stable, {elapsed:.0f}s)")
