"""Software cache oracle: replay an execution plan through an LRU model.

The model is a single-level, fully associative, line-granular LRU cache.
Replaying the per-row accesses of a plan in its sequential execution order
yields the bytes each stream pulls from "main memory", and from that the
measured code balance

    B_C,m = total bytes / (2 * N_nz * p_m)  [byte/flop].

Streams are tracked separately: the matrix stream is val + col (12 bytes
per nonzero), the row pointer and the power vectors are accounted
explicitly on their own.  Each array lives in its own address space, so
there is no false sharing between streams.

A capacity of zero bypasses the cache entirely: every access then counts
exactly its own bytes, which makes the no-cache bound come out at
p_m * 12 * N_nz matrix bytes, one sweep's worth per power.
"""

from dataclasses import dataclass

import numpy as np

from .backend import USING_NUMBA
from .plan import ExecPlan

S_VAL, S_COL, S_ROWPTR, S_Y = 0, 1, 2, 3
_STREAM_BYTES = np.array([8, 4, 4, 8], dtype=np.int64)  # access sizes


@dataclass(frozen=True)
class CacheModel:
    capacity_bytes: int
    line_bytes: int = 64

    def __post_init__(self):
        if self.capacity_bytes < 0:
            raise ValueError("capacity must be >= 0")
        if self.line_bytes <= 0 or self.line_bytes % 4:
            raise ValueError("line size must be a positive multiple of 4")


@dataclass
class TrafficReport:
    matrix_bytes: int
    row_ptr_bytes: int
    vector_bytes: int
    n_nz: int
    p_m: int
    by_power: np.ndarray  # (p_m + 1, 3): matrix / row_ptr / vector bytes per power
    n_accesses: int = 0
    line_bytes: int = 64
    bypass: bool = False

    @property
    def total_bytes(self) -> int:
        return self.matrix_bytes + self.row_ptr_bytes + self.vector_bytes

    @property
    def n_misses(self) -> int:
        if self.bypass:  # no cache: every access misses
            return self.n_accesses
        return self.total_bytes // self.line_bytes

    @property
    def n_hits(self) -> int:
        return self.n_accesses - self.n_misses

    @property
    def code_balance(self) -> float:
        return self.total_bytes / (2.0 * self.n_nz * self.p_m)

    @property
    def matrix_code_balance(self) -> float:
        return self.matrix_bytes / (2.0 * self.n_nz * self.p_m)


def _sim_python(row_ptr, col, rs, re, power, in_slot, out_slot, n, n_powers,
                cap_lines, line_bytes, bypass):
    from collections import OrderedDict

    lv = line_bytes // 8  # float64 per line
    li = line_bytes // 4  # int32 per line
    by_power = np.zeros((n_powers, 4), dtype=np.int64)
    lru = OrderedDict()

    def touch(stream, line, p):
        key = (line << 2) | stream
        if bypass:
            by_power[p, stream] += _STREAM_BYTES[stream]
            return
        if key in lru:
            lru.move_to_end(key)
            return
        by_power[p, stream] += line_bytes
        if len(lru) >= cap_lines:
            lru.popitem(last=False)
        lru[key] = True

    for it in range(rs.shape[0]):
        p = int(power[it])
        s_in = int(in_slot[it])
        s_out = int(out_slot[it])
        for r in range(rs[it], re[it]):
            touch(S_ROWPTR, r // li, p)
            for k in range(row_ptr[r], row_ptr[r + 1]):
                touch(S_VAL, k // lv, p)
                touch(S_COL, k // li, p)
                touch(S_Y, (s_in * n + col[k]) // lv, p)
            touch(S_Y, (s_out * n + r) // lv, p)
    return by_power


if USING_NUMBA:
    from numba import njit, types
    from numba.typed import Dict

    @njit(cache=True)
    def _sim_numba(row_ptr, col, rs, re, power, in_slot, out_slot, n, n_powers,
                   cap_lines, line_bytes, bypass):
        lv = line_bytes // 8
        li = line_bytes // 4
        by_power = np.zeros((n_powers, 4), dtype=np.int64)
        # LRU: hash map key -> slot plus a doubly linked list over slots,
        # with sentinel slots cap (head, MRU side) and cap+1 (tail, LRU side)
        cap = cap_lines if cap_lines > 0 else 1
        key_of = np.empty(cap, dtype=np.int64)
        nxt = np.full(cap + 2, -1, dtype=np.int64)
        prv = np.full(cap + 2, -1, dtype=np.int64)
        head = cap
        tail = cap + 1
        nxt[head] = tail
        prv[tail] = head
        n_used = 0
        slot_of = Dict.empty(types.int64, types.int64)

        for it in range(rs.shape[0]):
            p = power[it]
            s_in = in_slot[it]
            s_out = out_slot[it]
            for r in range(rs[it], re[it]):
                k0 = row_ptr[r]
                k1 = row_ptr[r + 1]
                n_acc = 2 + 3 * (k1 - k0)
                for ai in range(n_acc):
                    if ai == 0:
                        stream = S_ROWPTR
                        line = r // li
                    elif ai == n_acc - 1:
                        stream = S_Y
                        line = (s_out * n + r) // lv
                    else:
                        k = k0 + (ai - 1) // 3
                        which = (ai - 1) % 3
                        if which == 0:
                            stream = S_VAL
                            line = k // lv
                        elif which == 1:
                            stream = S_COL
                            line = k // li
                        else:
                            stream = S_Y
                            line = (s_in * n + col[k]) // lv
                    if bypass:
                        by_power[p, stream] += _STREAM_BYTES[stream]
                        continue
                    key = np.int64((line << 2) | stream)
                    if key in slot_of:
                        s = slot_of[key]
                        prv[nxt[s]] = prv[s]
                        nxt[prv[s]] = nxt[s]
                    else:
                        by_power[p, stream] += line_bytes
                        if n_used < cap:
                            s = n_used
                            n_used += 1
                        else:
                            s = prv[tail]
                            prv[nxt[s]] = prv[s]
                            nxt[prv[s]] = nxt[s]
                            del slot_of[key_of[s]]
                        key_of[s] = key
                        slot_of[key] = s
                    # insert at MRU position
                    nxt[s] = nxt[head]
                    prv[s] = head
                    prv[nxt[head]] = s
                    nxt[head] = s
        return by_power


def simulate_traffic(plan: ExecPlan, cache: CacheModel) -> TrafficReport:
    """Replay a plan's sequential row order through the cache model."""
    a = plan.a
    n_powers = int(plan.out_slot.max()) + 1
    cap_lines = cache.capacity_bytes // cache.line_bytes
    bypass = cache.capacity_bytes == 0
    args = (a.row_ptr, a.col, plan.row_start, plan.row_end, plan.power,
            plan.in_slot, plan.out_slot, a.n_rows, n_powers,
            cap_lines, cache.line_bytes, bypass)
    if USING_NUMBA:
        by_power = _sim_numba(*args)
    else:
        by_power = _sim_python(*args)
    matrix = int(by_power[:, S_VAL].sum() + by_power[:, S_COL].sum())
    rp = int(by_power[:, S_ROWPTR].sum())
    vec = int(by_power[:, S_Y].sum())
    merged = np.stack(
        [by_power[:, S_VAL] + by_power[:, S_COL], by_power[:, S_ROWPTR], by_power[:, S_Y]],
        axis=1,
    )
    # per executed row: row_ptr + output store + (val, col, input) per nonzero
    rows = (plan.row_end - plan.row_start).astype(np.int64)
    nnzs = (a.row_ptr[plan.row_end] - a.row_ptr[plan.row_start]).astype(np.int64)
    n_acc = int((2 * rows + 3 * nnzs).sum())
    return TrafficReport(
        matrix_bytes=matrix,
        row_ptr_bytes=rp,
        vector_bytes=vec,
        n_nz=a.n_nz,
        p_m=plan.p_m,
        by_power=merged,
        n_accesses=n_acc,
        line_bytes=cache.line_bytes,
        bypass=bypass,
    )


def roofline_estimate(code_balance: float, mem_bw: float) -> float:
    """Memory-bound performance ceiling: bandwidth / code balance [flop/s]."""
    if code_balance <= 0 or mem_bw <= 0:
        raise ValueError("code balance and bandwidth must be positive")
    return mem_bw / code_balance
