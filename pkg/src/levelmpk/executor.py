"""MPK execution over flat plans with a fixed worker pool.

Every worker walks the same item list in order and computes its own
nnz-balanced chunk of each item.  Synchronization is lock-free: per-item,
per-worker completion flags (plain stores into shared uint8 arrays) with
spin-waits on the reader side.  Barrier variants wait for full completion
of the previous item before starting the next; point-to-point variants
wait only on the precomputed runtime checks.  A boundary flag is raised
mid-chunk, as soon as the worker finishes the rows of the item's
leftmost-level prefix, so a dependent group can start while the rest of
the chunk is still being computed.

Because each worker passes items strictly in order, "all workers raised
flag f of item m" implies "all workers completed everything before m",
which is what makes a single check on the latest dependency sufficient
and the whole scheme deadlock-free on any topologically valid item list.

All variants compute each row with the same per-row summation, so their
power vectors agree bitwise on the same permuted matrix.
"""

import threading
import time

import numpy as np

from .backend import USING_NUMBA, cpu_relax, sched_yield
from .csr import CsrMatrix, Permutation
from .groups import Preprocessed, preprocess
from .plan import KERNEL_CHEB, VARIANTS, ExecPlan, FlatItem, _validate_coverage, build_plan


class PowerVectors:
    """The p_max + 1 dense vectors y_0..y_{p_max}, each contiguous.

    y_0 is the caller-supplied input and is never written by kernels.
    """

    def __init__(self, n_rows, p_max, n_slots=None, data=None):
        self.n_rows = n_rows
        self.p_max = p_max
        slots = n_slots if n_slots is not None else p_max + 1
        if data is not None:
            assert data.shape == (slots, n_rows)
            self.data = data
        else:
            self.data = np.zeros((slots, n_rows), dtype=np.float64)

    def vec(self, p) -> np.ndarray:
        return self.data[p]

    def __getitem__(self, p):
        return self.data[p]


class MpkResult:
    def __init__(self, y, seconds, variant, workers, plan=None):
        self.y = y
        self.seconds = seconds
        self.variant = variant
        self.workers = workers
        self.plan = plan
        self.barrier_count = plan.barrier_count() if plan is not None else 0

    def gflops(self, n_nz, p_m) -> float:
        return 2.0 * n_nz * p_m / self.seconds / 1e9


def undo_permutation(result, perm: Permutation) -> PowerVectors:
    """Bring power vectors computed in permuted order back to the original."""
    y = result.y if isinstance(result, MpkResult) else result
    if perm.n != y.n_rows:
        raise ValueError(f"permutation length {perm.n} != vector length {y.n_rows}")
    out = PowerVectors(y.n_rows, y.p_max, n_slots=y.data.shape[0])
    out.data[:, perm.perm] = y.data
    return out


# -- numba walker ---------------------------------------------------------

if USING_NUMBA:
    from numba import njit

    @njit(nogil=True)
    def _wait_all(flags, m, workers):
        spins = 0
        while True:
            ok = True
            for w in range(workers):
                if flags[m, w] == 0:
                    ok = False
                    break
            if ok:
                return
            spins += 1
            if spins & 63 == 0:
                sched_yield()  # bounded back-off under oversubscription
            else:
                cpu_relax()

    @njit(nogil=True)
    def _walk(wid, workers, row_ptr, col, val, y, acc, use_acc,
              rs, re, out_slot, in_slot, prev_slot, kern, acoef,
              chunks, bnd_point, barrier,
              check_ptr, check_item, check_kind, done, bnd_done):
        n_items = rs.shape[0]
        for n in range(n_items):
            if barrier:
                if n > 0:
                    _wait_all(done, n - 1, workers)
            else:
                for c in range(check_ptr[n], check_ptr[n + 1]):
                    if check_kind[c] == 1:
                        _wait_all(bnd_done, check_item[c], workers)
                    else:
                        _wait_all(done, check_item[c], workers)
            # opaque call: no y loads may be hoisted above the checks
            cpu_relax()
            cs = chunks[n, wid]
            ce = chunks[n, wid + 1]
            bp = bnd_point[n, wid]
            o = out_slot[n]
            i_in = in_slot[n]
            i_pv = prev_slot[n]
            kk = kern[n]
            cf = acoef[n]
            for r in range(cs, bp):
                tmp = 0.0
                for k in range(row_ptr[r], row_ptr[r + 1]):
                    tmp += val[k] * y[i_in, col[k]]
                if kk == 1:
                    tmp = 2.0 * tmp - y[i_pv, r]
                y[o, r] = tmp
                if use_acc:
                    acc[r] += cf * tmp
            # boundary rows must be visible before their flag
            cpu_relax()
            bnd_done[n, wid] = 1
            for r in range(bp, ce):
                tmp = 0.0
                for k in range(row_ptr[r], row_ptr[r + 1]):
                    tmp += val[k] * y[i_in, col[k]]
                if kk == 1:
                    tmp = 2.0 * tmp - y[i_pv, r]
                y[o, r] = tmp
                if use_acc:
                    acc[r] += cf * tmp
            # stores above must retire before the completion flag
            cpu_relax()
            done[n, wid] = 1


def _run_numba(plan: ExecPlan, y, acc, use_acc, timeout):
    a = plan.a
    n_items = plan.n_items
    W = plan.workers
    done = np.zeros((max(n_items, 1), W), dtype=np.uint8)
    bnd_done = np.zeros((max(n_items, 1), W), dtype=np.uint8)
    args = (a.row_ptr, a.col, a.val, y, acc, use_acc,
            plan.row_start, plan.row_end, plan.out_slot, plan.in_slot,
            plan.prev_slot, plan.kernel, plan.acc_coef,
            plan.chunks, plan.bnd_point, plan.barrier,
            plan.check_ptr, plan.check_item, plan.check_kind, done, bnd_done)
    if W == 1:
        _walk(0, 1, *args)
        return
    threads = [
        threading.Thread(target=_walk, args=(w, W) + args, daemon=True)
        for w in range(W)
    ]
    for t in threads:
        t.start()
    deadline = None if timeout is None else time.monotonic() + timeout
    for t in threads:
        t.join(None if deadline is None else max(deadline - time.monotonic(), 0.0))
        if t.is_alive():
            raise RuntimeError(
                f"executor watchdog: workers still running after {timeout} s"
            )


# -- numpy walker (sequential reference path) ------------------------------

def _walk_numpy(plan: ExecPlan, y, acc, use_acc):
    a = plan.a
    row_ptr = a.row_ptr
    col = a.col
    val = a.val
    for k in range(plan.n_items):
        rs = int(plan.row_start[k])
        re = int(plan.row_end[k])
        if re <= rs:
            continue
        lo = int(row_ptr[rs])
        hi = int(row_ptr[re])
        x = y[plan.in_slot[k]]
        if hi > lo:
            prod = val[lo:hi] * x[col[lo:hi]]
            seg = row_ptr[rs:re].astype(np.int64) - lo
            sums = np.add.reduceat(prod, np.minimum(seg, prod.size - 1))
            sums[np.diff(row_ptr[rs : re + 1]) == 0] = 0.0
        else:
            sums = np.zeros(re - rs)
        if plan.kernel[k] == KERNEL_CHEB:
            sums = 2.0 * sums - y[plan.prev_slot[k], rs:re]
        y[plan.out_slot[k], rs:re] = sums
        if use_acc:
            acc[rs:re] += plan.acc_coef[k] * sums


# -- public entry points ----------------------------------------------------

def run_plan(plan: ExecPlan, x=None, y=None, acc=None, use_acc=False, timeout=None):
    """Execute a plan; returns an MpkResult with wall time and power vectors."""
    n = plan.n_rows
    if y is None:
        pv = PowerVectors(n, plan.p_m)
        if x is None:
            raise ValueError("either x or y must be given")
        pv.data[0] = np.asarray(x, dtype=np.float64)
    else:
        pv = y
    acc_arr = acc if acc is not None else np.zeros(0, dtype=np.float64)
    t0 = time.perf_counter()
    if USING_NUMBA:
        _run_numba(plan, pv.data, acc_arr, use_acc, timeout)
    else:
        _walk_numpy(plan, pv.data, acc_arr, use_acc)
    seconds = time.perf_counter() - t0
    return MpkResult(pv, seconds, plan.variant, plan.workers, plan)


def build_baseline_plan(a: CsrMatrix, p_m: int, workers: int) -> ExecPlan:
    """p_m full-range SpMV sweeps with a barrier between sweeps."""
    from .plan import _nnz_balanced_chunks  # local import to avoid cycle noise

    n = a.n_rows
    items = [FlatItem(0, n, p, 0, "group", 0, label=("baseline",))
             for p in range(1, p_m + 1)]
    _validate_coverage(items, n, p_m)
    row_start = np.zeros(p_m, dtype=np.int64)
    row_end = np.full(p_m, n, dtype=np.int64)
    power = np.arange(1, p_m + 1, dtype=np.int64)
    chunks = np.empty((p_m, workers + 1), dtype=np.int64)
    chunks[:] = _nnz_balanced_chunks(a.row_ptr, 0, n, workers)
    return ExecPlan(
        variant="baseline", p_m=p_m, workers=workers, n_rows=n, items=items,
        barrier=True, row_start=row_start, row_end=row_end, power=power,
        chunks=chunks, bnd_point=chunks[:, :-1].copy(),
        check_ptr=np.zeros(p_m + 1, dtype=np.int64),
        check_item=np.empty(0, dtype=np.int64),
        check_kind=np.empty(0, dtype=np.int64),
        a=a, pre=None, schedule=None,
        out_slot=power.copy(), in_slot=power - 1,
        prev_slot=np.maximum(power - 2, 0),
        kernel=np.zeros(p_m, dtype=np.int64),
        acc_coef=np.zeros(p_m, dtype=np.float64),
    )


def run_baseline(a: CsrMatrix, x, p_m: int, workers: int = 1, timeout=None) -> MpkResult:
    """Baseline MPK: y_p = A y_{p-1} as p_m full parallel sweeps."""
    if np.asarray(x).shape != (a.n_rows,):
        raise ValueError("x length must equal n_rows")
    plan = build_baseline_plan(a, p_m, workers)
    return run_plan(plan, x=x, timeout=timeout)


def prepare(a: CsrMatrix, variant: str, p_m: int, cache_bytes: float,
            f: float = 0.5, s_m: int = 0, root: int = 0) -> Preprocessed:
    """Preprocess a matrix with the grouping implied by the variant.

    ``lb`` blocks on raw levels; ``lb_lg`` and ``lb_lg_p2p`` use level
    groups without recursion; ``lb_lg_p2p_rec`` honors ``s_m``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "lb":
        return preprocess(a, p_m, max(cache_bytes, 1.0), f, s_m=0, root=root,
                          grouping="levels")
    eff_sm = s_m if variant == "lb_lg_p2p_rec" else 0
    return preprocess(a, p_m, cache_bytes, f, s_m=eff_sm, root=root)


def run_mpk(a: CsrMatrix, x, variant: str, p_m: int, cache_bytes: float,
            f: float = 0.5, s_m: int = 0, workers: int = 1, root: int = 0,
            timeout=None):
    """Preprocess, execute, and undo the permutation in one call.

    Returns (result, pre); result.y is in the *permuted* ordering, use
    ``undo_permutation(result, pre.perm)`` for the original one.
    """
    if variant == "baseline":
        return run_baseline(a, x, p_m, workers, timeout=timeout), None
    pre = prepare(a, variant, p_m, cache_bytes, f, s_m, root)
    plan = build_plan(pre, variant, workers)
    x_perm = pre.perm.apply_to_vector(np.asarray(x, dtype=np.float64))
    return run_plan(plan, x=x_perm, timeout=timeout), pre


def warmup():
    """Trigger JIT compilation of the walker on a tiny problem."""
    from .stencils import gen_stencil_2d7pt

    a = gen_stencil_2d7pt(2, 2)
    run_baseline(a, np.ones(a.n_rows), p_m=1, workers=1)
