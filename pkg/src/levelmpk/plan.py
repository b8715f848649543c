"""Flattening schedules into executable plans.

The executor walks a single flat list of items; an item is a contiguous
row range to be advanced to one power.  Plain level-group nodes map to one
item each.  A subgraph step expands into the child schedule's items merged
with the "diamond" work of the neighboring outer groups: the merge order
is produced by list scheduling against the true data dependencies (read
columns at the previous power), with child items keeping their natural
diagonal order wherever dependencies permit and outer pieces slotted in as
soon as they become ready.

The plan also carries everything the synchronization machinery needs:
nnz-balanced worker chunks, the boundary-prefix row of every item, and the
per-item runtime checks for point-to-point execution.  Because every
worker walks items strictly in list order, completion of an item implies
completion of everything before it for that worker; a full-completion
check on the latest dependency therefore covers all earlier ones, and a
boundary check suffices when the needed rows lie inside the target's
leftmost constituent level.
"""

import heapq
from dataclasses import dataclass, field

import numpy as np

from .csr import CsrMatrix
from .groups import Preprocessed
from .schedule import LpNode, LpSchedule, SubgraphCall, build_schedule

CHECK_FULL = 0
CHECK_BOUNDARY = 1

KERNEL_SPMV = 0
KERNEL_CHEB = 1  # y_out = 2 * A y_in - y_prev

VARIANTS = ("baseline", "lb", "lb_lg", "lb_lg_p2p", "lb_lg_p2p_rec")
BARRIER_VARIANTS = ("baseline", "lb", "lb_lg")


@dataclass
class FlatItem:
    row_start: int
    row_end: int  # exclusive
    power: int
    stage: int
    kind: str  # "group" | "outer"
    boundary_end: int  # end of the leftmost-level prefix (== row_start if none)
    label: tuple = ()


def _flatten_items(sched: LpSchedule, tree, a_perm):
    out = []
    for it in sched.items:
        if isinstance(it, LpNode):
            g = tree.groups[it.group]
            out.append(
                FlatItem(
                    row_start=g.row_start,
                    row_end=g.row_end,
                    power=it.power,
                    stage=sched.stage,
                    kind="group",
                    boundary_end=g.boundary_left_end,
                    label=(sched.stage, it.group),
                )
            )
        else:
            out.extend(_diamond_step(it, tree, a_perm))
    return out


def _outer_pieces(call: SubgraphCall, tree):
    """Flat items for the outer diamond nodes of one subgraph step.

    Each halo group executes its diamond power range [delta+1, p_m-delta]
    in level/key-portion pieces so the list scheduler can advance them with
    the child wavefront.
    """
    span = call.span
    p_m = call.child.p_m
    pieces = []
    for side_idx, split in enumerate((span.left_split, span.right_split)):
        if split is None:
            continue
        for gi, delta in split.groups:
            levels = split.levels_by_group[gi]
            for p in range(delta + 1, p_m - delta + 1):
                for li, lev in enumerate(levels):
                    for k, ((lo, hi), key) in enumerate(zip(lev.portions, lev.keys)):
                        if hi <= lo:
                            continue
                        pieces.append(
                            (
                                FlatItem(lo, hi, p, call.stage, "outer", lo,
                                         label=(call.stage, gi, li, k)),
                                (p, side_idx, delta, li, key, k),
                            )
                        )
    return pieces


def _item_deps(items, a_perm, n_rows):
    """True dependencies: dep(u) = items at power-1 owning u's read columns.

    Returns one sorted dependency-index array per item.  Dependencies on
    work outside the item set (already completed by construction) simply
    do not appear.
    """
    powers = sorted({it.power for it in items})
    owner = {p: np.full(n_rows, -1, dtype=np.int64) for p in powers}
    for idx, it in enumerate(items):
        owner[it.power][it.row_start : it.row_end] = idx
    row_ptr = a_perm.row_ptr
    col = a_perm.col
    deps = []
    for it in items:
        prev = owner.get(it.power - 1)
        if prev is None:
            deps.append(np.empty(0, dtype=np.int64))
            continue
        cols = col[row_ptr[it.row_start] : row_ptr[it.row_end]]
        touched = np.unique(
            np.concatenate([cols.astype(np.int64),
                            np.arange(it.row_start, it.row_end, dtype=np.int64)])
        )
        d = np.unique(prev[touched])
        deps.append(d[d >= 0])
    return deps


def _merge_diamond(child_items, outer_pieces, a_perm):
    """Order the union of child items and outer diamond pieces.

    List scheduling over true dependencies; child items keep their relative
    priority (their index in the child walk), ready outer pieces always go
    first, ordered by (power, side, delta, portion).
    """
    if not outer_pieces:
        return child_items
    items = list(child_items) + [p for p, _ in outer_pieces]
    n_child = len(child_items)
    deps = _item_deps(items, a_perm, a_perm.n_rows)
    n = len(items)
    n_unmet = np.zeros(n, dtype=np.int64)
    consumers = [[] for _ in range(n)]
    for u, dlist in enumerate(deps):
        n_unmet[u] = len(dlist)
        for d in dlist:
            consumers[d].append(u)
    child_ready = []  # heap of child index
    outer_ready = []  # heap of (sort key, index)
    for u in range(n):
        if n_unmet[u] == 0:
            if u < n_child:
                heapq.heappush(child_ready, u)
            else:
                heapq.heappush(outer_ready, (outer_pieces[u - n_child][1], u))
    order = []
    while child_ready or outer_ready:
        if outer_ready:
            _, u = heapq.heappop(outer_ready)
        else:
            u = heapq.heappop(child_ready)
        order.append(u)
        for v in consumers[u]:
            n_unmet[v] -= 1
            if n_unmet[v] == 0:
                if v < n_child:
                    heapq.heappush(child_ready, v)
                else:
                    heapq.heappush(outer_ready, (outer_pieces[v - n_child][1], v))
    if len(order) != n:
        raise RuntimeError("cyclic dependencies in diamond merge (bug)")
    return [items[u] for u in order]


def _diamond_step(call: SubgraphCall, tree, a_perm):
    child_items = _flatten_items(call.child, call.span.tree, a_perm)
    outer_pieces = _outer_pieces(call, tree)
    return _merge_diamond(child_items, outer_pieces, a_perm)


@dataclass
class ExecPlan:
    """Fully materialized execution recipe shared read-only by workers."""

    variant: str
    p_m: int
    workers: int
    n_rows: int
    items: list
    barrier: bool
    # flat arrays consumed by the kernels
    row_start: np.ndarray
    row_end: np.ndarray
    power: np.ndarray
    chunks: np.ndarray  # (n_items, workers + 1) row boundaries
    bnd_point: np.ndarray  # (n_items, workers) boundary-flag row per chunk
    check_ptr: np.ndarray
    check_item: np.ndarray
    check_kind: np.ndarray
    a: CsrMatrix
    pre: Preprocessed | None = None
    schedule: LpSchedule | None = None
    # kernel selection (set up by the Chebyshev driver; defaults to plain MPK)
    out_slot: np.ndarray = None
    in_slot: np.ndarray = None
    prev_slot: np.ndarray = None
    kernel: np.ndarray = None
    acc_coef: np.ndarray = None

    @property
    def n_items(self) -> int:
        return len(self.items)

    def barrier_count(self) -> int:
        return self.n_items if self.barrier else 0


def _nnz_balanced_chunks(row_ptr, row_start, row_end, workers):
    """Split [row_start, row_end) into ``workers`` contiguous nnz-balanced chunks."""
    lo = int(row_ptr[row_start])
    hi = int(row_ptr[row_end])
    if row_end <= row_start or hi == lo:
        return np.full(workers + 1, row_start, dtype=np.int64)
    targets = lo + (hi - lo) * np.arange(1, workers, dtype=np.int64) // workers
    cuts = np.searchsorted(row_ptr[row_start : row_end + 1], targets, side="left")
    bounds = np.empty(workers + 1, dtype=np.int64)
    bounds[0] = row_start
    bounds[1:workers] = row_start + cuts
    bounds[workers] = row_end
    return np.maximum.accumulate(bounds)


def _validate_coverage(items, n_rows, p_m):
    """Every row must be computed exactly once per power."""
    for p in range(1, p_m + 1):
        ranges = sorted((it.row_start, it.row_end) for it in items if it.power == p)
        pos = 0
        for lo, hi in ranges:
            if lo != pos:
                raise RuntimeError(f"power {p}: rows [{pos}, {lo}) uncovered or doubled")
            pos = hi
        if pos != n_rows:
            raise RuntimeError(f"power {p}: rows [{pos}, {n_rows}) uncovered")


def build_plan(pre: Preprocessed, variant: str, workers: int,
               p_m_override: int | None = None) -> ExecPlan:
    """Materialize the execution plan for one variant and worker count.

    ``p_m_override`` may lower the power count below the one the tree was
    preprocessed for (used for remainder batches); the grouping stays valid
    since the cache criterion only relaxes for smaller p_m.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r} (choose from {VARIANTS})")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    a = pre.a
    n = a.n_rows
    p_m = pre.p_m if p_m_override is None else p_m_override
    if p_m > pre.p_m:
        raise ValueError("p_m_override may not exceed the preprocessed p_m")
    schedule = None
    if variant == "baseline":
        items = [
            FlatItem(0, n, p, 0, "group", 0, label=("baseline",))
            for p in range(1, p_m + 1)
        ]
    else:
        schedule = build_schedule(pre.tree, p_m)
        items = _flatten_items(schedule, pre.tree, a)
    _validate_coverage(items, n, p_m)

    barrier = variant in BARRIER_VARIANTS
    n_items = len(items)
    row_start = np.array([it.row_start for it in items], dtype=np.int64)
    row_end = np.array([it.row_end for it in items], dtype=np.int64)
    power = np.array([it.power for it in items], dtype=np.int64)

    chunks = np.empty((n_items, workers + 1), dtype=np.int64)
    for k, it in enumerate(items):
        chunks[k] = _nnz_balanced_chunks(a.row_ptr, it.row_start, it.row_end, workers)
    bnd = np.array([it.boundary_end for it in items], dtype=np.int64)
    bnd_point = np.clip(bnd[:, None], chunks[:, :-1], chunks[:, 1:])

    check_ptr = np.zeros(n_items + 1, dtype=np.int64)
    check_item = np.empty(0, dtype=np.int64)
    check_kind = np.empty(0, dtype=np.int64)
    if not barrier:
        check_ptr, check_item, check_kind = _runtime_checks(items, a)

    plan = ExecPlan(
        variant=variant,
        p_m=p_m,
        workers=workers,
        n_rows=n,
        items=items,
        barrier=barrier,
        row_start=row_start,
        row_end=row_end,
        power=power,
        chunks=chunks,
        bnd_point=bnd_point,
        check_ptr=check_ptr,
        check_item=check_item,
        check_kind=check_kind,
        a=a,
        pre=pre,
        schedule=schedule,
        out_slot=power.copy(),
        in_slot=power - 1,
        prev_slot=np.maximum(power - 2, 0),
        kernel=np.zeros(n_items, dtype=np.int64),
        acc_coef=np.zeros(n_items, dtype=np.float64),
    )
    return plan


def _runtime_checks(items, a_perm):
    """Per-item spin checks for point-to-point execution.

    Emits condition (A): full completion of the latest item covering the
    same rows at the previous power, plus at most one further check on the
    latest remaining dependency (boundary-granular when the needed columns
    lie inside that item's leftmost-level prefix).  All earlier
    dependencies are implied by the in-order walk.  Also validates that the
    flat order is topologically consistent with the true dependencies.
    """
    n = len(items)
    deps = _item_deps(items, a_perm, a_perm.n_rows)
    row_ptr = a_perm.row_ptr
    col = a_perm.col
    ptr = np.zeros(n + 1, dtype=np.int64)
    out_item = []
    out_kind = []
    for u, dlist in enumerate(deps):
        if dlist.size and dlist.max() >= u:
            bad = items[int(dlist.max())]
            raise RuntimeError(
                f"schedule order violates dependency: item {u} {items[u].label} "
                f"p={items[u].power} needs later item {bad.label} p={bad.power}"
            )
        checks = []
        if dlist.size:
            it = items[u]
            # condition (A): own rows at the previous power
            own = dlist[
                (np.array([items[d].row_start for d in dlist]) < it.row_end)
                & (np.array([items[d].row_end for d in dlist]) > it.row_start)
            ]
            a_target = int(own.max()) if own.size else int(dlist.max())
            checks.append((a_target, CHECK_FULL))
            rest = dlist[dlist > a_target]
            if rest.size:
                m = int(rest.max())
                tgt = items[m]
                cols = col[row_ptr[it.row_start] : row_ptr[it.row_end]]
                inside = cols[(cols >= tgt.row_start) & (cols < tgt.row_end)]
                if inside.size and inside.max() < tgt.boundary_end:
                    checks.append((m, CHECK_BOUNDARY))
                else:
                    checks.append((m, CHECK_FULL))
        ptr[u + 1] = ptr[u] + len(checks)
        for m, kind in checks:
            out_item.append(m)
            out_kind.append(kind)
    return ptr, np.asarray(out_item, dtype=np.int64), np.asarray(out_kind, dtype=np.int64)
