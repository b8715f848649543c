"""Chebyshev time propagation for the heat equation.

One time step applies the exponential evolution operator,

    x_{t+dt} = U(dt) x_t,   U(dt) = sum_{k=0}^{M} c_k(dt) T_k(B),

where B is the operator affinely scaled so its spectrum lies in [-1, 1]
and T_k are Chebyshev polynomials of the first kind.  The T_k(B) x vectors
obey the three-term recurrence v_{k+1} = 2 B v_k - v_{k-1}, so a step is a
chain of M operator applications.  These are executed in batches of
``p_m_batch`` through the level-blocked MPK machinery: the recurrence's
scalar combination and the accumulation of c_k v_k are fused into the
per-group kernel, so cache blocking carries across recurrence steps.

For the heat operator (exp(-dt A) with A symmetric positive), scaling
B = (2 / (l_max - l_min)) (mu I - A) with mu = (l_max + l_min) / 2 gives

    exp(-dt A) = e^{-mu dt} [ I_0(a dt) + 2 sum_{k>=1} I_k(a dt) T_k(B) ],

with a = (l_max - l_min) / 2 and I_k the modified Bessel functions, which
are evaluated by Miller's downward recurrence.  The expansion is truncated
at the first M beyond which all coefficients fall below the cutoff.
"""

import time
from dataclasses import dataclass

import numpy as np

from .csr import CsrMatrix
from .executor import PowerVectors, run_plan
from .groups import preprocess
from .plan import KERNEL_CHEB, KERNEL_SPMV, build_plan


def bessel_i_seq(z: float, k_max: int) -> np.ndarray:
    """I_0(z)..I_{k_max}(z) by Miller's downward recurrence.

    Trial values run down from well above k_max and are normalized with
    the identity e^z = I_0 + 2 sum_{k>=1} I_k.  Accurate to roundoff for
    the moderate arguments used here; z must be >= 0.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    out = np.zeros(k_max + 1)
    if z == 0.0:
        out[0] = 1.0
        return out
    if z > 700.0:
        raise ValueError("argument too large for the unscaled recurrence; reduce dt")
    start = int(max(k_max, z) + 2 * np.sqrt(max(k_max, z)) + 24)
    hi = 0.0
    lo = 1e-280
    total = 0.0  # accumulates trial_0 + 2 sum trial_k as we descend
    for k in range(start, -1, -1):
        cur = hi + (2.0 * (k + 1) / z) * lo
        if cur > 1e260:  # rescale to dodge overflow
            cur *= 1e-260
            lo *= 1e-260
            total *= 1e-260
            out *= 1e-260
        if k <= k_max:
            out[k] = cur
        total += cur if k == 0 else 2.0 * cur
        hi, lo = lo, cur
    out *= np.exp(z) / total
    return out


@dataclass(frozen=True)
class ChebCoeffs:
    """Expansion coefficients c_0..c_M for one time step of length dt."""

    c: np.ndarray
    dt: float
    lam_min: float
    lam_max: float
    tol: float

    @property
    def n_moments(self) -> int:
        return self.c.shape[0] - 1


def cheb_coeffs_heat(dt, lam_min, lam_max, tol=1e-4, max_terms=100_000) -> ChebCoeffs:
    """Coefficients of the Chebyshev expansion of exp(-dt A).

    M is the smallest index with |c_k| < tol for all k > M.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if lam_max < lam_min:
        raise ValueError("lam_max must be >= lam_min")
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu = 0.5 * (lam_max + lam_min)
    alpha = 0.5 * (lam_max - lam_min)
    z = alpha * dt
    pref = np.exp(-mu * dt)
    k_max = min(max(int(2 * z) + 16, 32), max_terms)
    while True:
        bes = bessel_i_seq(z, k_max)
        c = np.empty(k_max + 1)
        c[0] = pref * bes[0]
        c[1:] = 2.0 * pref * bes[1:]
        if abs(c[k_max]) < tol:
            break
        if k_max >= max_terms:
            raise ValueError(
                f"no cutoff below {tol} within {max_terms} moments; reduce dt"
            )
        k_max = min(2 * k_max, max_terms)
    big = np.flatnonzero(np.abs(c) >= tol)
    m = int(big.max()) if big.size else 0
    return ChebCoeffs(c=c[: m + 1].copy(), dt=dt, lam_min=lam_min,
                      lam_max=lam_max, tol=tol)


def eval_cheb_series(c: np.ndarray, x):
    """Scalar oracle: sum c_k T_k(x) via the same three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    acc = c[0] * np.ones_like(x)
    if c.shape[0] == 1:
        return acc
    v_prev = np.ones_like(x)
    v = x.copy()
    acc = acc + c[1] * v
    for k in range(2, c.shape[0]):
        v_prev, v = v, 2.0 * x * v - v_prev
        acc += c[k] * v
    return acc


def gershgorin_bounds(a: CsrMatrix):
    """Cheap safe enclosure of the spectrum of a (real, pattern-symmetric)."""
    rows, cols, vals = a.to_triplets()
    diag = np.zeros(a.n_rows)
    radius = np.zeros(a.n_rows)
    on = rows == cols
    diag[rows[on]] = vals[on]
    np.add.at(radius, rows[~on], np.abs(vals[~on]))
    return float((diag - radius).min()), float((diag + radius).max())


def scale_for_heat(a: CsrMatrix, lam_min, lam_max) -> CsrMatrix:
    """B = (2 / (l_max - l_min)) (mu I - A): spectrum of A mapped into [-1, 1].

    With this orientation exp(-dt A) has the all-positive Bessel expansion
    used by cheb_coeffs_heat.
    """
    if lam_max <= lam_min:
        raise ValueError("lam_max must exceed lam_min")
    mu = 0.5 * (lam_max + lam_min)
    s = 2.0 / (lam_max - lam_min)
    rows, cols, vals = a.to_triplets()
    rows = np.concatenate([rows, np.arange(a.n_rows)])
    cols = np.concatenate([cols, np.arange(a.n_rows)])
    vals = np.concatenate([-s * vals, np.full(a.n_rows, s * mu)])
    return CsrMatrix.from_triplets(a.n_rows, rows, cols, vals)


class ChebPropagator:
    """Reusable one-step propagator: preprocesses once, steps many times."""

    def __init__(self, a: CsrMatrix, dt, bounds=None, tol=1e-4, p_m_batch=4,
                 cache_bytes=32 * 2**20, f=0.5, s_m=0, workers=1,
                 variant="lb_lg_p2p", root=0, coeffs: ChebCoeffs = None):
        if p_m_batch < 1:
            raise ValueError("p_m_batch must be >= 1")
        self.a = a
        if coeffs is not None:
            lam_min, lam_max = coeffs.lam_min, coeffs.lam_max
            self.coeffs = coeffs
        else:
            lam_min, lam_max = bounds if bounds is not None else gershgorin_bounds(a)
            if lam_max <= lam_min:
                lam_max = lam_min + 1.0  # degenerate spectrum (scaled identity)
            self.coeffs = cheb_coeffs_heat(dt, lam_min, lam_max, tol)
        self.b = scale_for_heat(a, lam_min, lam_max)
        self.workers = workers
        self.variant = variant
        m = self.coeffs.n_moments
        self.p_b = min(p_m_batch, m) if m >= 1 else 1
        if variant == "baseline":
            from .executor import build_baseline_plan

            self.pre = None
            self._plan_for = {
                pb: build_baseline_plan(self.b, pb, workers)
                for pb in {self.p_b, m % self.p_b or self.p_b}
            }
            self._xperm = lambda v: v
            self._unperm = lambda v: v
        else:
            self.pre = preprocess(self.b, self.p_b, cache_bytes, f,
                                  s_m=s_m if variant == "lb_lg_p2p_rec" else 0,
                                  root=root,
                                  grouping="levels" if variant == "lb" else "cache")
            self._plan_for = {}
            for pb in {self.p_b, m % self.p_b or self.p_b}:
                self._plan_for[pb] = build_plan(self.pre, variant, workers,
                                                p_m_override=pb)
            self._xperm = self.pre.perm.apply_to_vector
            self._unperm = self.pre.perm.undo_on_vector
        n = a.n_rows
        self._y = PowerVectors(n, self.p_b + 1, n_slots=self.p_b + 2)
        self.flops_per_step = 2.0 * a.n_nz * max(m, 1)

    def _configure(self, plan, k_base, first_batch):
        """Point the plan's kernels at the sliding slot window for one batch."""
        c = self.coeffs.c
        p = plan.power
        plan.in_slot[:] = p
        plan.out_slot[:] = p + 1
        plan.prev_slot[:] = p - 1
        plan.kernel[:] = KERNEL_CHEB
        if first_batch:
            plan.kernel[p == 1] = KERNEL_SPMV
        plan.acc_coef[:] = c[k_base + p]

    def step(self, x: np.ndarray) -> np.ndarray:
        """One time step: returns x_{t+dt} in the original row ordering."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.a.n_rows,):
            raise ValueError("state vector length must equal n_rows")
        c = self.coeffs.c
        m = self.coeffs.n_moments
        xp = self._xperm(x)
        acc = c[0] * xp
        if m == 0:
            return self._unperm(acc)
        y = self._y.data
        y[1] = xp
        k_done = 0
        first = True
        while k_done < m:
            pb = min(self.p_b, m - k_done)
            plan = self._plan_for[pb]
            self._configure(plan, k_done, first)
            run_plan(plan, y=self._y, acc=acc, use_acc=True)
            k_done += pb
            if k_done < m:
                y[0] = y[pb]
                y[1] = y[pb + 1]
            first = False
        return self._unperm(acc)

    def propagate(self, x0: np.ndarray, n_steps: int):
        """n_steps successive steps; returns (endpoint, per-step records)."""
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        x = np.asarray(x0, dtype=np.float64)
        records = []
        for step in range(n_steps):
            t0 = time.perf_counter()
            x = self.step(x)
            dt_wall = time.perf_counter() - t0
            records.append(
                {
                    "step": step,
                    "seconds": dt_wall,
                    "gflops": self.flops_per_step / dt_wall / 1e9,
                }
            )
        return x, records


def cheb_step(a: CsrMatrix, coeffs: ChebCoeffs, x, p_m_batch=4, workers=1,
              variant="lb_lg_p2p", cache_bytes=32 * 2**20, s_m=0):
    """One-shot convenience wrapper around ChebPropagator.

    ``a`` is the unscaled operator; scaling and preprocessing are derived
    from ``coeffs``'s spectral bounds.
    """
    prop = ChebPropagator(
        a, coeffs.dt, coeffs=coeffs, p_m_batch=p_m_batch,
        cache_bytes=cache_bytes, s_m=s_m, workers=workers, variant=variant,
    )
    return prop.step(x)


def propagate(a: CsrMatrix, dt, x0, n_steps, **kwargs):
    """Propagate the heat state n_steps; see ChebPropagator for knobs."""
    prop = ChebPropagator(a, dt, **kwargs)
    return prop.propagate(x0, n_steps)
