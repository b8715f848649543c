"""Level-blocked sparse matrix power kernels.

Computes y_p = A^p x for p = 1..p_m with BFS-level cache blocking across
powers: levels -> level groups -> diagonal Lp schedules -> point-to-point
synchronized execution -> recursive refinement, plus a trace-driven LRU
cache oracle for the data-traffic claims and a Chebyshev heat-equation
propagator built on the same executor.
"""

__version__ = "0.1.0"

from .backend import HAS_NUMBA, USING_NUMBA, backend_name
from .cheb import (
    ChebCoeffs,
    ChebPropagator,
    bessel_i_seq,
    cheb_coeffs_heat,
    cheb_step,
    eval_cheb_series,
    gershgorin_bounds,
    propagate,
    scale_for_heat,
)
from .csr import CsrMatrix, Permutation, permute_symmetric, spmv_range
from .executor import (
    MpkResult,
    PowerVectors,
    build_baseline_plan,
    prepare,
    run_baseline,
    run_mpk,
    run_plan,
    undo_permutation,
    warmup,
)
from .groups import (
    BYTES_PER_NNZ,
    LevelGroup,
    LevelGroupTree,
    Preprocessed,
    aggregate_level_groups,
    cache_budget_nnz,
    cache_criterion_satisfied,
    preprocess,
)
from .levels import LevelSet, bfs_levels
from .mmio import MatrixMarketError, load_matrix_market, save_matrix_market
from .plan import VARIANTS, ExecPlan, build_plan
from .schedule import LpNode, LpSchedule, build_schedule, reuse_distance, sync_edges
from .stencils import gen_stencil_2d7pt, gen_stencil_3d, stencil_3d_nnz
from .traffic import CacheModel, TrafficReport, roofline_estimate, simulate_traffic

__all__ = [
    "BYTES_PER_NNZ", "CacheModel", "ChebCoeffs", "ChebPropagator", "CsrMatrix",
    "ExecPlan", "HAS_NUMBA", "LevelGroup", "LevelGroupTree", "LevelSet",
    "LpNode", "LpSchedule", "MatrixMarketError", "MpkResult", "Permutation",
    "PowerVectors", "Preprocessed", "TrafficReport", "USING_NUMBA", "VARIANTS",
    "aggregate_level_groups", "backend_name", "bessel_i_seq", "bfs_levels",
    "build_baseline_plan", "build_plan", "build_schedule", "cheb_coeffs_heat",
    "cheb_step", "cache_budget_nnz", "cache_criterion_satisfied", "eval_cheb_series",
    "gen_stencil_2d7pt", "gen_stencil_3d", "gershgorin_bounds",
    "load_matrix_market", "permute_symmetric", "prepare", "preprocess",
    "propagate", "reuse_distance", "roofline_estimate", "run_baseline",
    "run_mpk", "run_plan", "save_matrix_market", "scale_for_heat",
    "simulate_traffic", "spmv_range", "stencil_3d_nnz", "sync_edges",
    "undo_permutation", "warmup",
]
