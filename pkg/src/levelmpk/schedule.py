"""Lp-diagram schedules: diagonal traversal, dependencies, recursion steps.

The Lp diagram has one node (i, p) per level group i and power p.  Node
(i, p) computes power p on the rows of group i and depends on (i-1, p-1),
(i, p-1), and (i+1, p-1).  Execution walks diagonals d = i + p in
ascending order, bottom to top within a diagonal, which satisfies all
three dependencies without reordering.  With G groups that yields G * p_m
nodes, and a group touched at power p is touched again at p + 1 after at
most p_m + 1 steps.

When a refined span is present, every node of the surrounding
parallelogram is classified by its relation to the child computation:

* input-only:  feeds the child but reads nothing from it -> runs before,
* output-only: reads child results only                  -> runs after,
* diamond:     both                                      -> runs inside,
* inside:      the span's own nodes                      -> child schedule.

Inside and diamond nodes collapse into a single execution step that
invokes the child schedule (the step is emitted once the last input-only
node has run; deferred output-only nodes follow immediately after).
"""

from dataclasses import dataclass, field

from .groups import LevelGroupTree, RefinedSpan

INPUT_ONLY = "input"
OUTPUT_ONLY = "output"
DIAMOND = "diamond"
INSIDE = "inside"


@dataclass
class LpNode:
    group: int
    power: int
    stage: int
    exec_step: int = -1
    # row geometry of the group, copied in so sync edges are self-contained
    row_start: int = 0
    row_end: int = 0
    boundary_left_end: int = 0
    classification: str | None = None


@dataclass
class SubgraphCall:
    """One execution step standing for a child schedule plus diamond work."""

    span: RefinedSpan
    stage: int
    child: "LpSchedule"
    exec_step: int = -1
    diamond_nodes: list = field(default_factory=list)  # outer (group, power) pairs


@dataclass
class LpSchedule:
    stage: int
    p_m: int
    n_groups: int
    items: list  # LpNode | SubgraphCall in execution order

    def nodes(self):
        return [it for it in self.items if isinstance(it, LpNode)]

    def find(self, group, power):
        for it in self.items:
            if isinstance(it, LpNode) and it.group == group and it.power == power:
                return it
        return None


def classify_outer(i, p, a, b, p_m):
    """Relation of node (i, p) to the span of groups [a, b] (None = unrelated)."""
    if a <= i <= b:
        return INSIDE
    delta = a - i if i < a else i - b
    provides = p <= p_m - delta
    consumes = p >= delta + 1
    if provides and consumes:
        return DIAMOND
    if provides:
        return INPUT_ONLY
    if consumes:
        return OUTPUT_ONLY
    return None


def _diagonal_order(n_groups, p_m):
    """Pure Lp traversal: (i, p) pairs over ascending diagonals d = i + p."""
    out = []
    for d in range(1, n_groups + p_m):
        p_lo = max(1, d - (n_groups - 1))
        p_hi = min(d, p_m)
        for p in range(p_lo, p_hi + 1):
            out.append((d - p, p))
    return out


def build_schedule(tree: LevelGroupTree, p_m: int) -> LpSchedule:
    """Execution schedule for one stage of a level-group tree (recursive)."""
    if p_m < 1:
        raise ValueError("p_m must be >= 1")
    groups = tree.groups
    n_groups = len(groups)
    spans = tree.spans

    calls = {}
    input_left = {}
    deferred = {}
    for si, span in enumerate(spans):
        child = build_schedule(span.tree, p_m)
        calls[si] = SubgraphCall(span=span, stage=tree.stage, child=child)
        input_left[si] = 0
        deferred[si] = []

    def owning_span(i, p):
        owners = [
            (si, cls)
            for si, span in enumerate(spans)
            for cls in (classify_outer(i, p, span.first_group, span.last_group, p_m),)
            if cls is not None
        ]
        if len(owners) > 1:  # parallelogram merging must prevent this
            raise RuntimeError(f"node ({i}, {p}) claimed by several refined spans")
        return owners[0] if owners else (None, None)

    pure = _diagonal_order(n_groups, p_m)
    if spans:
        for i, p in pure:
            si, cls = owning_span(i, p)
            if cls == INPUT_ONLY:
                input_left[si] += 1

    items = []
    emitted = {si: False for si in calls}

    def emit_call(si):
        items.append(calls[si])
        emitted[si] = True
        for node in deferred[si]:
            items.append(node)
        deferred[si] = []

    for i, p in pure:
        si, cls = owning_span(i, p) if spans else (None, None)
        if cls in (INSIDE, DIAMOND):
            if cls == DIAMOND:
                calls[si].diamond_nodes.append((i, p))
            if not emitted[si] and input_left[si] == 0:
                emit_call(si)
            continue
        g = groups[i]
        node = LpNode(
            group=i,
            power=p,
            stage=tree.stage,
            row_start=g.row_start,
            row_end=g.row_end,
            boundary_left_end=g.boundary_left_end,
            classification=cls,
        )
        if cls == INPUT_ONLY:
            items.append(node)
            input_left[si] -= 1
            if input_left[si] == 0 and not emitted[si]:
                emit_call(si)
        elif cls == OUTPUT_ONLY:
            if emitted[si]:
                items.append(node)
            else:
                deferred[si].append(node)
        else:
            items.append(node)

    for step, it in enumerate(items):
        it.exec_step = step
    return LpSchedule(stage=tree.stage, p_m=p_m, n_groups=n_groups, items=items)


def reuse_distance(schedule: LpSchedule, group: int, power: int = 1) -> int:
    """Execution steps between the (group, power) and (group, power+1) nodes."""
    lo = schedule.find(group, power)
    hi = schedule.find(group, power + 1)
    if lo is None or hi is None:
        raise ValueError(
            f"group {group} has no plain nodes at powers {power}, {power + 1} "
            "(refined groups execute inside a subgraph step)"
        )
    return hi.exec_step - lo.exec_step


@dataclass(frozen=True)
class SyncEdge:
    node: tuple  # (group, power)
    kind: str  # "A" | "B" | "C"
    target: tuple  # (group, power - 1)
    runtime: bool
    boundary_rows: tuple | None = None  # (row_start, row_end) for kind C


def sync_edges(schedule: LpSchedule):
    """Point-to-point dependency list for a stage schedule.

    Per node at power p > 1: condition (A), full completion of the same
    group at p-1 (runtime check); condition (B), the left neighbor at
    p-1, satisfied by the diagonal order (metadata only); condition (C),
    completion of the right neighbor's leftmost constituent level at p-1
    (runtime check), absent for the last group.  Covers the schedule's
    plain nodes; pairs folded into a subgraph step get their runtime
    checks from the execution plan, which works at item granularity.
    """
    by_key = {}
    for it in schedule.items:
        if isinstance(it, LpNode):
            by_key[(it.group, it.power)] = it
    edges = []
    for it in schedule.items:
        if not isinstance(it, LpNode) or it.power == 1:
            continue
        i, p = it.group, it.power
        edges.append(SyncEdge(node=(i, p), kind="A", target=(i, p - 1), runtime=True))
        if (i - 1, p - 1) in by_key:
            edges.append(
                SyncEdge(node=(i, p), kind="B", target=(i - 1, p - 1), runtime=False)
            )
        right = by_key.get((i + 1, p - 1))
        if right is not None:
            edges.append(
                SyncEdge(
                    node=(i, p),
                    kind="C",
                    target=(i + 1, p - 1),
                    runtime=True,
                    boundary_rows=(right.row_start, right.boundary_left_end),
                )
            )
    return edges


def schedule_to_dict(schedule: LpSchedule):
    """JSON-friendly dump used by the CLI and golden tests."""
    items = []
    for it in schedule.items:
        if isinstance(it, LpNode):
            items.append(
                {
                    "step": it.exec_step,
                    "group": it.group,
                    "power": it.power,
                    "kind": "node",
                    "classification": it.classification,
                }
            )
        else:
            items.append(
                {
                    "step": it.exec_step,
                    "kind": "subgraph",
                    "groups": [it.span.first_group, it.span.last_group],
                    "diamond_nodes": it.diamond_nodes,
                    "child": schedule_to_dict(it.child),
                }
            )
    return {
        "stage": schedule.stage,
        "p_m": schedule.p_m,
        "n_groups": schedule.n_groups,
        "items": items,
    }
