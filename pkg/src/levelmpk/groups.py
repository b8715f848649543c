"""Level groups, the cache-fit criterion, and recursive refinement.

A level group is a run of consecutive levels aggregated greedily until the
cache criterion

    (p_m + 1) * nnz(group) * 12 bytes < f * C

would fail.  A single level that alone breaks the bound becomes its own
group, flagged as size-violating.  Runs of flagged groups can be refined
recursively: the induced subgraph of their rows is re-traversed by BFS,
renumbered in place (composing into the global permutation), regrouped,
and the process repeats down to a maximum stage ``s_m``.

Refinement bookkeeping beyond the obvious:

* Candidate spans whose surrounding parallelograms (span widened by
  p_m - 1 groups per side) would overlap are merged into one span.
* For p_m >= 3 the scheduler must interleave the neighbor groups' middle
  powers with the child walk (the "diamond").  To give those interleaved
  pieces contiguous row ranges, the subgraph-facing boundary level of each
  neighbor group is stably reordered by the highest child group its rows
  couple to; the resulting cut points are recorded on the span.
"""

from dataclasses import dataclass, field

import numpy as np

from .csr import CsrMatrix, Permutation, permute_symmetric
from .levels import LevelSet, bfs_levels, bfs_on_pattern, symmetrized_pattern

#: Cache-criterion traffic constant: 8-byte value + 4-byte column index per nonzero.
BYTES_PER_NNZ = 12


def cache_budget_nnz(p_m: int, cache_bytes: float, f: float) -> float:
    """Largest admissible group nnz (exclusive bound) under the cache criterion."""
    if p_m < 1:
        raise ValueError("p_m must be >= 1")
    if cache_bytes <= 0:
        raise ValueError("cache_bytes must be positive")
    if not (0 < f <= 1):
        raise ValueError("f must be in (0, 1]")
    return f * cache_bytes / ((p_m + 1) * BYTES_PER_NNZ)


def cache_criterion_satisfied(group_nnz: int, p_m: int, cache_bytes: float, f: float) -> bool:
    return (p_m + 1) * group_nnz * BYTES_PER_NNZ < f * cache_bytes


@dataclass
class LevelGroup:
    """Contiguous row range covering one or more whole levels."""

    row_start: int
    row_end: int  # exclusive
    nnz: int
    boundary_left_end: int  # end of the lowest-indexed constituent level
    boundary_right_start: int  # start of the highest-indexed constituent level
    n_levels: int
    violates: bool = False
    children: "LevelGroupTree | None" = None

    @property
    def n_rows(self) -> int:
        return self.row_end - self.row_start


@dataclass
class HaloLevel:
    """One level of a halo group, reordered by child-wavefront key.

    ``portions`` partitions the level's rows into contiguous runs of equal
    key; ``keys[k]`` is the highest child-group index portion k transitively
    couples to (-1 when unreachable from the subgraph within this level).
    """

    row_start: int
    row_end: int
    portions: list  # [(row_start, row_end), ...]
    keys: list


@dataclass
class NeighborSplit:
    """Diamond halo of a refined span on one side.

    The groups within (p_m - 1) / 2 of the span have middle powers that
    must interleave with the child walk.  Their levels are reordered so
    rows coupling to nearby child groups sit together, giving the
    interleaved pieces contiguous row ranges whose dependencies track the
    child wavefront instead of the whole subgraph.
    """

    side: str  # "left" | "right"
    groups: list  # [(group_index, delta), ...] ordered by delta
    levels_by_group: dict  # group_index -> [HaloLevel, ...] ordered span-outward


@dataclass
class RefinedSpan:
    """A run of groups replaced by a child tree at the next stage."""

    first_group: int
    last_group: int  # inclusive
    row_start: int
    row_end: int
    levels: LevelSet  # child levels, level_ptr in global permuted rows
    tree: "LevelGroupTree"
    left_split: NeighborSplit | None = None
    right_split: NeighborSplit | None = None


@dataclass
class LevelGroupTree:
    stage: int
    groups: list
    spans: list = field(default_factory=list)

    def span_covering(self, group_index):
        for span in self.spans:
            if span.first_group <= group_index <= span.last_group:
                return span
        return None

    def iter_leaf_groups(self):
        """Leaf groups in row order, descending through refined spans."""
        for gi, g in enumerate(self.groups):
            span = self.span_covering(gi)
            if span is None:
                yield g
            elif gi == span.first_group:
                yield from span.tree.iter_leaf_groups()

    def max_depth(self) -> int:
        if not self.spans:
            return 0
        return 1 + max(span.tree.max_depth() for span in self.spans)


def _groups_from_level_nnz(level_ptr, level_nnz, budget, flag_violations=True):
    """Greedy left-to-right aggregation of levels into groups."""
    groups = []
    n_levels = len(level_nnz)
    i = 0
    while i < n_levels:
        acc = int(level_nnz[i])
        j = i
        while j + 1 < n_levels and acc + level_nnz[j + 1] < budget:
            j += 1
            acc += int(level_nnz[j])
        groups.append(
            LevelGroup(
                row_start=int(level_ptr[i]),
                row_end=int(level_ptr[j + 1]),
                nnz=acc,
                boundary_left_end=int(level_ptr[i + 1]),
                boundary_right_start=int(level_ptr[j]),
                n_levels=j - i + 1,
                violates=flag_violations and not (acc < budget),
            )
        )
        i = j + 1
    return groups


def _groups_one_per_level(level_ptr, level_nnz):
    groups = []
    for i in range(len(level_nnz)):
        groups.append(
            LevelGroup(
                row_start=int(level_ptr[i]),
                row_end=int(level_ptr[i + 1]),
                nnz=int(level_nnz[i]),
                boundary_left_end=int(level_ptr[i + 1]),
                boundary_right_start=int(level_ptr[i]),
                n_levels=1,
                violates=False,
            )
        )
    return groups


def aggregate_level_groups(levels: LevelSet, a: CsrMatrix, p_m, cache_bytes, f=0.5):
    """Aggregate the levels of an already-permuted matrix into level groups."""
    budget = cache_budget_nnz(p_m, cache_bytes, f)
    row_nnz = a.row_nnz
    level_nnz = np.add.reduceat(row_nnz, levels.level_ptr[:-1])
    return _groups_from_level_nnz(levels.level_ptr, level_nnz, budget)


def _merge_spans(runs, p_m):
    """Merge flagged runs whose parallelograms (run +- (p_m - 1)) overlap."""
    if not runs:
        return []
    halo = p_m - 1
    merged = [list(runs[0])]
    for lo, hi in runs[1:]:
        if lo - halo <= merged[-1][1] + halo:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def _flagged_runs(groups):
    runs = []
    i = 0
    while i < len(groups):
        if groups[i].violates:
            j = i
            while j + 1 < len(groups) and groups[j + 1].violates:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


class _Builder:
    """Carries the shared state of one preprocessing run."""

    def __init__(self, a, p_m, cache_bytes, f, s_m, grouping):
        self.p_m = p_m
        self.cache_bytes = cache_bytes
        self.f = f
        self.s_m = s_m
        self.grouping = grouping
        self.budget = cache_budget_nnz(p_m, cache_bytes, f) if grouping == "cache" else None
        self.row_nnz_orig = np.asarray(a.row_nnz, dtype=np.int64)
        self.sym_ptr, self.sym_col = symmetrized_pattern(a)
        self.n = a.n_rows
        self.perm = None  # current new -> original, updated in place

    # -- helpers ---------------------------------------------------------

    def _induced_pattern(self, row_lo, row_hi):
        """Local symmetric pattern of the rows [row_lo, row_hi) under self.perm."""
        orig = self.perm[row_lo:row_hi].astype(np.int64)
        m = orig.shape[0]
        local_of = np.full(self.n, -1, dtype=np.int64)
        local_of[orig] = np.arange(m)
        starts = self.sym_ptr[orig]
        counts = self.sym_ptr[orig + 1] - starts
        total = int(counts.sum())
        gather = np.arange(total, dtype=np.int64)
        cum = np.zeros(m, dtype=np.int64)
        np.cumsum(counts[:-1], out=cum[1:])
        gather += np.repeat(starts - cum, counts)
        nbr_local = local_of[self.sym_col[gather]]
        keep = nbr_local >= 0
        row_of = np.repeat(np.arange(m, dtype=np.int64), counts)[keep]
        col_local = nbr_local[keep]
        ptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(ptr, row_of + 1, 1)
        np.cumsum(ptr, out=ptr)
        return ptr, col_local

    def _level_nnz(self, level_ptr):
        per_row = self.row_nnz_orig[self.perm[level_ptr[0] : level_ptr[-1]].astype(np.int64)]
        return np.add.reduceat(per_row, (level_ptr[:-1] - level_ptr[0]).astype(np.int64))

    def _neighbor_key_max(self, row_lo, row_hi, key_orig):
        """Per-row max of key_orig over each row's neighborhood (-1 if none)."""
        orig = self.perm[row_lo:row_hi].astype(np.int64)
        starts = self.sym_ptr[orig]
        counts = self.sym_ptr[orig + 1] - starts
        total = int(counts.sum())
        keys = np.full(orig.shape[0], -1, dtype=np.int64)
        if total == 0:
            return keys
        gather = np.arange(total, dtype=np.int64)
        offsets = np.zeros(orig.shape[0], dtype=np.int64)
        np.cumsum(counts[:-1], out=offsets[1:])
        gather += np.repeat(starts - offsets, counts)
        nbr_keys = key_orig[self.sym_col[gather]]
        nz = counts > 0
        keys[nz] = np.maximum.reduceat(nbr_keys, offsets[nz])
        return keys

    def _build_halo(self, side, span, groups, level_ptr):
        """Key-sort the diamond halo levels on one side of a refined span.

        Keys seed at the child top-level groups and propagate outward one
        level at a time.  Rows within each halo level are stably reordered
        by key, so the pieces the scheduler interleaves with the child walk
        are contiguous and wavefront-local.
        """
        hw = (self.p_m - 1) // 2
        if side == "left":
            deltas = [
                (span.first_group - d, d)
                for d in range(1, hw + 1)
                if span.first_group - d >= 0
            ]
        else:
            deltas = [
                (span.last_group + d, d)
                for d in range(1, hw + 1)
                if span.last_group + d < len(groups)
            ]
        if not deltas:
            return None
        key_orig = np.full(self.n, -1, dtype=np.int64)
        for gi, g in enumerate(span.tree.groups):
            key_orig[self.perm[g.row_start : g.row_end].astype(np.int64)] = gi
        levels_by_group = {}
        for group_index, _delta in deltas:
            g = groups[group_index]
            lev_lo = int(np.searchsorted(level_ptr, g.row_start))
            lev_hi = int(np.searchsorted(level_ptr, g.row_end))
            lev_range = range(lev_hi - 1, lev_lo - 1, -1) if side == "left" else range(
                lev_lo, lev_hi
            )
            pieces = []
            for li in lev_range:
                lo = int(level_ptr[li])
                hi = int(level_ptr[li + 1])
                keys = self._neighbor_key_max(lo, hi, key_orig)
                order = np.argsort(keys, kind="stable")
                self.perm[lo:hi] = self.perm[lo:hi][order]
                keys = keys[order]
                key_orig[self.perm[lo:hi].astype(np.int64)] = keys
                cuts = [0] + list(np.flatnonzero(np.diff(keys)) + 1) + [hi - lo]
                pieces.append(
                    HaloLevel(
                        row_start=lo,
                        row_end=hi,
                        portions=[(lo + cuts[k], lo + cuts[k + 1]) for k in range(len(cuts) - 1)],
                        keys=[int(keys[c]) for c in cuts[:-1]],
                    )
                )
            levels_by_group[group_index] = pieces
        return NeighborSplit(side=side, groups=deltas, levels_by_group=levels_by_group)

    # -- main recursion ---------------------------------------------------

    def build(self, stage, level_ptr):
        level_nnz = self._level_nnz(level_ptr)
        if self.grouping == "levels":
            groups = _groups_one_per_level(level_ptr, level_nnz)
        else:
            groups = _groups_from_level_nnz(level_ptr, level_nnz, self.budget)
        tree = LevelGroupTree(stage=stage, groups=groups)
        if self.grouping == "levels" or stage >= self.s_m:
            return tree
        spans = _merge_spans(_flagged_runs(groups), self.p_m)
        for lo, hi in spans:
            r0 = groups[lo].row_start
            r1 = groups[hi].row_end
            if r1 - r0 <= 1:
                continue  # single row cannot be refined further
            ptr, col_local = self._induced_pattern(r0, r1)
            order, child_level_ptr = bfs_on_pattern(ptr, col_local, r1 - r0, 0)
            self.perm[r0:r1] = self.perm[r0:r1][order.astype(np.int64)]
            child_levels = LevelSet(child_level_ptr + r0, root=r0)
            child_tree = self.build(stage + 1, child_level_ptr + r0)
            span = RefinedSpan(lo, hi, r0, r1, child_levels, child_tree)
            if self.p_m >= 3:
                span.left_split = self._build_halo("left", span, groups, level_ptr)
                span.right_split = self._build_halo("right", span, groups, level_ptr)
            for g in groups[lo : hi + 1]:
                g.children = child_tree
            tree.spans.append(span)
        return tree


@dataclass
class Preprocessed:
    """Result of the whole preprocessing pipeline for one matrix."""

    a: CsrMatrix  # symmetrically permuted into the final ordering
    perm: Permutation  # final ordering -> original
    levels: LevelSet  # stage-0 levels
    tree: LevelGroupTree
    p_m: int
    cache_bytes: float
    f: float
    s_m: int
    grouping: str
    root: int

    def leaf_groups(self):
        return list(self.tree.iter_leaf_groups())

    def flagged_leaves(self):
        return [g for g in self.leaf_groups() if g.violates and g.children is None]


def preprocess(
    a: CsrMatrix,
    p_m: int,
    cache_bytes: float,
    f: float = 0.5,
    s_m: int = 0,
    root: int = 0,
    grouping: str = "cache",
) -> Preprocessed:
    """BFS ordering, level groups, and recursive refinement in one pass.

    ``grouping='levels'`` keeps every level as its own group (the naive
    level-blocked variant) and disables both flagging and recursion.
    """
    if grouping not in ("cache", "levels"):
        raise ValueError(f"unknown grouping {grouping!r}")
    if s_m < 0:
        raise ValueError("s_m must be >= 0")
    builder = _Builder(a, p_m, cache_bytes, f, s_m, grouping)
    levels0, perm0 = bfs_levels(a, root)
    builder.perm = perm0.perm.astype(np.int64).copy()
    tree = builder.build(0, levels0.level_ptr)
    perm = Permutation(builder.perm)
    a_perm = permute_symmetric(a, perm)
    return Preprocessed(
        a=a_perm,
        perm=perm,
        levels=levels0,
        tree=tree,
        p_m=p_m,
        cache_bytes=cache_bytes,
        f=f,
        s_m=s_m,
        grouping=grouping,
        root=root,
    )
