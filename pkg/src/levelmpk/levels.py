"""Breadth-first level construction and level-ordered renumbering.

Levels are BFS distance classes of the matrix graph from a root vertex.
Level 0 holds the root; level i holds the unvisited combined neighborhood
of level i-1.  By construction all neighbors of a vertex in level i lie in
levels i-1, i, or i+1; that confinement is what makes level-blocked power
computations legal.

Non-symmetric patterns are symmetrized (A | A^T) before the traversal so
the confinement gates dependencies in both row and column direction.
Disconnected graphs restart the search at the lowest-index unvisited
vertex, appended as further levels.  Each level's vertices are emitted in
sorted order, which makes the renumbering deterministic regardless of any
internal parallelism.
"""

from dataclasses import dataclass

import numpy as np

from .csr import INDEX_DTYPE, CsrMatrix, Permutation


@dataclass(frozen=True)
class LevelSet:
    """level_ptr[i] is the first permuted row of level i; L_m levels total."""

    level_ptr: np.ndarray
    root: int

    def __post_init__(self):
        object.__setattr__(
            self, "level_ptr", np.ascontiguousarray(self.level_ptr, dtype=np.int64)
        )

    @property
    def n_levels(self) -> int:
        return self.level_ptr.shape[0] - 1

    @property
    def n_rows(self) -> int:
        return int(self.level_ptr[-1])

    def level_sizes(self) -> np.ndarray:
        return np.diff(self.level_ptr)


def symmetrized_pattern(a: CsrMatrix):
    """Pattern of A | A^T as (row_ptr, col) in canonical order."""
    rows, cols, _ = a.to_triplets()
    n = a.n_rows
    key = np.concatenate(
        [rows.astype(np.int64) * n + cols, cols.astype(np.int64) * n + rows]
    )
    key = np.unique(key)
    srows = key // n
    scols = key % n
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(row_ptr, srows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return row_ptr, scols.astype(INDEX_DTYPE)


def bfs_on_pattern(row_ptr, col, n, root):
    """Core frontier-expansion BFS over an adjacency pattern.

    Returns (order, level_ptr): order[k] is the original vertex at permuted
    position k; each level sorted ascending.  Restarts on exhausted
    components at the lowest unvisited vertex.
    """
    if not (0 <= root < n):
        raise ValueError(f"root {root} out of range for n={n}")
    row_ptr = np.asarray(row_ptr, dtype=np.int64)
    col = np.asarray(col)
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=INDEX_DTYPE)
    level_ptr = [0]
    frontier = np.array([root], dtype=np.int64)
    visited[root] = True
    pos = 0
    while pos < n:
        order[pos : pos + frontier.size] = frontier
        pos += frontier.size
        level_ptr.append(pos)
        # combined neighborhood of the current level, deduplicated + sorted
        starts = row_ptr[frontier]
        counts = row_ptr[frontier + 1] - starts
        total = int(counts.sum())
        if total:
            gather = np.arange(total, dtype=np.int64)
            cum = np.zeros(frontier.size, dtype=np.int64)
            np.cumsum(counts[:-1], out=cum[1:])
            gather += np.repeat(starts - cum, counts)
            nbrs = np.unique(col[gather])
            nbrs = nbrs[~visited[nbrs]]
        else:
            nbrs = np.empty(0, dtype=np.int64)
        if nbrs.size == 0 and pos < n:
            # disconnected: restart at the lowest unvisited vertex
            nbrs = np.array([np.flatnonzero(~visited)[0]], dtype=np.int64)
        visited[nbrs] = True
        frontier = nbrs.astype(np.int64)
    return order, np.asarray(level_ptr, dtype=np.int64)


def bfs_levels(a: CsrMatrix, root: int = 0):
    """BFS levels of the (symmetrized) matrix graph plus the level ordering.

    The permutation numbers vertices consecutively within levels, level i-1
    before level i.
    """
    row_ptr, col = symmetrized_pattern(a)
    order, level_ptr = bfs_on_pattern(row_ptr, col, a.n_rows, root)
    return LevelSet(level_ptr, root), Permutation(order)
