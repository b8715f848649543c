"""Command-line front end.

Subcommands:

* ``run``      time MPK variants (CSV/JSON rows with Gflop/s and
               preprocessing cost in seconds and equivalent SpMVs)
* ``scan``     parameter study over p_m, cache size, and recursion depth
* ``inspect``  dump levels, level groups, recursion tree, and the schedule
* ``traffic``  replay a schedule through the cache model
* ``cheb``     Chebyshev heat propagation timings
* ``bench``    compare the numba and numpy backends on one problem

Matrices come from a Matrix Market file (``--matrix``) or a generator spec
(``--gen 2d7pt:8x8`` or ``--gen 3d:16,order=2``).  Cache sizes accept
human units: bare bytes, decimal kB/MB/GB, or binary KiB/MiB/GiB.  The
worker count defaults to the LEVELMPK_WORKERS environment variable, then
to the machine's core count.
"""

import argparse
import csv
import io
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from .backend import backend_name
from .cheb import ChebPropagator
from .csr import CsrMatrix
from .executor import build_baseline_plan, prepare, run_plan, warmup
from .groups import cache_criterion_satisfied
from .levels import bfs_levels
from .mmio import load_matrix_market
from .plan import VARIANTS, build_plan
from .schedule import build_schedule, schedule_to_dict
from .stencils import gen_stencil_2d7pt, gen_stencil_3d
from .traffic import CacheModel, roofline_estimate, simulate_traffic

_UNITS = {
    "": 1, "b": 1,
    "kb": 10**3, "mb": 10**6, "gb": 10**9,
    "kib": 2**10, "mib": 2**20, "gib": 2**30,
}


def parse_bytes(text) -> int:
    """'35MB' -> 35_000_000; '1MiB' -> 1_048_576; bare numbers are bytes."""
    s = str(text).strip().lower()
    num = s
    unit = ""
    for i, ch in enumerate(s):
        if ch.isalpha():
            num, unit = s[:i], s[i:]
            break
    try:
        value = float(num)
        factor = _UNITS[unit]
    except (ValueError, KeyError):
        raise argparse.ArgumentTypeError(f"cannot parse byte size {text!r}")
    return int(value * factor)


def parse_gen(spec) -> CsrMatrix:
    """Generator spec: '2d7pt:NXxNY' or '3d:N[,order=K]'."""
    kind, _, rest = str(spec).partition(":")
    kind = kind.strip().lower()
    if kind == "2d7pt":
        nx, _, ny = rest.partition("x")
        return gen_stencil_2d7pt(int(nx), int(ny or nx))
    if kind == "3d":
        parts = rest.split(",")
        n = int(parts[0])
        order = 2
        for p in parts[1:]:
            key, _, val = p.partition("=")
            if key.strip() != "order":
                raise ValueError(f"unknown 3d generator option {p!r}")
            order = int(val)
        return gen_stencil_3d(n, order)
    raise ValueError(f"unknown generator {spec!r} (2d7pt:NXxNY or 3d:N,order=K)")


def _load_matrix(args) -> CsrMatrix:
    if getattr(args, "matrix", None):
        return load_matrix_market(args.matrix)
    if getattr(args, "gen", None):
        return parse_gen(args.gen)
    raise ValueError("one of --matrix or --gen is required")


def _default_workers() -> int:
    env = os.environ.get("LEVELMPK_WORKERS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _emit(rows, columns, args):
    """Write rows as CSV (default) or JSON to --out or stdout."""
    if args.format == "json":
        text = json.dumps(rows if isinstance(rows, dict) else list(rows), indent=2)
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow(row)
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _timed(plan, x, reps):
    """Average wall seconds per run; adaptive repetitions to >= 1 s total."""
    res = run_plan(plan, x=x)  # untimed warm run (JIT, page faults)
    if reps is not None:
        times = [run_plan(plan, x=x).seconds for _ in range(reps)]
        return res, sum(times) / len(times), reps
    total = 0.0
    times = []
    while total < 1.0 and len(times) < 1000:
        t = run_plan(plan, x=x).seconds
        times.append(t)
        total += t
    return res, sum(times) / len(times), len(times)


RUN_COLUMNS = ["variant", "p_m", "cache_bytes", "f", "s_m", "workers", "reps",
               "seconds", "gflops", "pre_seconds", "pre_equiv_spmvs", "verified"]


def _run_one(a, x, variant, args, s_m=None, cache=None, p_m=None):
    p_m = p_m if p_m is not None else args.pm
    cache = cache if cache is not None else args.cache
    s_m = s_m if s_m is not None else args.sm
    t0 = time.perf_counter()
    if variant == "baseline":
        pre = None
        plan = build_baseline_plan(a, p_m, args.workers)
        x_run = x
    else:
        pre = prepare(a, variant, p_m, cache, args.f, s_m, args.root)
        plan = build_plan(pre, variant, args.workers)
        x_run = pre.perm.apply_to_vector(x)
    pre_seconds = time.perf_counter() - t0

    res, seconds, reps = _timed(plan, x_run, args.reps)

    # preprocessing cost in equivalent single SpMV sweeps
    spmv_plan = build_baseline_plan(plan.a, 1, args.workers)
    _, spmv_seconds, _ = _timed(spmv_plan, x_run, args.reps or 3)

    verified = ""
    if args.verify and variant != "baseline":
        base = run_plan(build_baseline_plan(plan.a, p_m, args.workers), x=x_run)
        same = all(
            np.array_equal(res.y[p], base.y[p]) for p in range(p_m + 1)
        )
        verified = "ok" if same else "MISMATCH"
        if not same:
            raise RuntimeError(f"--verify failed: {variant} != baseline bitwise")
    return {
        "variant": variant,
        "p_m": p_m,
        "cache_bytes": int(cache),
        "f": args.f,
        "s_m": s_m,
        "workers": args.workers,
        "reps": reps,
        "seconds": round(seconds, 9),
        "gflops": round(2.0 * a.n_nz * p_m / seconds / 1e9, 4),
        "pre_seconds": round(pre_seconds, 6),
        "pre_equiv_spmvs": round(pre_seconds / spmv_seconds, 2),
        "verified": verified,
    }


def cmd_run(args):
    a = _load_matrix(args)
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal(a.n_rows)
    warmup()
    variants = args.variant.split(",")
    rows = [_run_one(a, x, v.strip(), args) for v in variants]
    _emit(rows, RUN_COLUMNS, args)
    return 0


def _int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def cmd_scan(args):
    a = _load_matrix(args)
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal(a.n_rows)
    warmup()
    pm_list = _int_list(args.pm_list) if args.pm_list else [1, 2, 3, 4, 6, 8, 10, 12, 14, 16]
    sm_list = _int_list(args.sm_list) if args.sm_list else [0, 1, 2, 4, 6, 20]
    cache_list = (
        [parse_bytes(tok) for tok in args.cache_list.split(",")]
        if args.cache_list
        else [args.cache]
    )
    variant = args.variant
    rows = []
    for pm in pm_list:
        for cache in cache_list:
            for sm in sm_list if variant == "lb_lg_p2p_rec" else [0]:
                rows.append(_run_one(a, x, variant, args, s_m=sm, cache=cache, p_m=pm))
    _emit(rows, RUN_COLUMNS, args)
    return 0


def _tree_to_dict(tree, p_m, cache_bytes, f):
    groups = []
    for g in tree.groups:
        groups.append(
            {
                "row_start": g.row_start,
                "row_end": g.row_end,
                "n_rows": g.n_rows,
                "nnz": g.nnz,
                "n_levels": g.n_levels,
                "violates": g.violates,
                "cache_criterion_satisfied": cache_criterion_satisfied(g.nnz, p_m, cache_bytes, f),
                "refined": g.children is not None,
            }
        )
    spans = []
    for s in tree.spans:
        spans.append(
            {
                "first_group": s.first_group,
                "last_group": s.last_group,
                "rows": [s.row_start, s.row_end],
                "child_levels": int(s.levels.n_levels),
                "child": _tree_to_dict(s.tree, p_m, cache_bytes, f),
            }
        )
    return {"stage": tree.stage, "groups": groups, "spans": spans}


def cmd_inspect(args):
    a = _load_matrix(args)
    pre = prepare(a, args.variant, args.pm, args.cache, args.f, args.sm, args.root)
    sched = build_schedule(pre.tree, args.pm)
    doc = {
        "n_rows": a.n_rows,
        "n_nz": a.n_nz,
        "p_m": args.pm,
        "cache_bytes": int(args.cache),
        "f": args.f,
        "s_m": args.sm,
        "root": args.root,
        "n_levels": int(pre.levels.n_levels),
        "level_ptr": pre.levels.level_ptr.tolist(),
        "tree": _tree_to_dict(pre.tree, args.pm, args.cache, args.f),
        "schedule": schedule_to_dict(sched),
    }
    args.format = "json"
    _emit(doc, None, args)
    return 0


TRAFFIC_COLUMNS = ["variant", "p_m", "c_model", "matrix_bytes", "row_ptr_bytes",
                   "vector_bytes", "total_bytes", "code_balance",
                   "matrix_code_balance", "roofline_gflops"]


def cmd_traffic(args):
    a = _load_matrix(args)
    sim_cache = args.sim_cache if args.sim_cache is not None else args.cache
    rows = []
    for variant in args.variant.split(","):
        variant = variant.strip()
        if variant == "baseline":
            plan = build_baseline_plan(a, args.pm, 1)
        else:
            pre = prepare(a, variant, args.pm, args.cache, args.f, args.sm, args.root)
            plan = build_plan(pre, variant, 1)
        rep = simulate_traffic(plan, CacheModel(sim_cache, args.line_bytes))
        rows.append(
            {
                "variant": variant,
                "p_m": args.pm,
                "c_model": int(sim_cache),
                "matrix_bytes": rep.matrix_bytes,
                "row_ptr_bytes": rep.row_ptr_bytes,
                "vector_bytes": rep.vector_bytes,
                "total_bytes": rep.total_bytes,
                "code_balance": round(rep.code_balance, 6),
                "matrix_code_balance": round(rep.matrix_code_balance, 6),
                "roofline_gflops": round(
                    roofline_estimate(rep.code_balance, args.mem_bw) / 1e9, 3
                ),
            }
        )
    _emit(rows, TRAFFIC_COLUMNS, args)
    return 0


CHEB_COLUMNS = ["step", "seconds", "gflops"]


def cmd_cheb(args):
    a = _load_matrix(args)
    rng = np.random.default_rng(args.seed)
    x0 = rng.standard_normal(a.n_rows)
    warmup()
    prop = ChebPropagator(
        a, args.dt, tol=args.tol, p_m_batch=args.pm_batch,
        cache_bytes=args.cache, f=args.f, s_m=args.sm,
        workers=args.workers, variant=args.variant,
    )
    _, records = prop.propagate(x0, args.steps)
    rows = [
        {"step": r["step"], "seconds": round(r["seconds"], 9),
         "gflops": round(r["gflops"], 4)}
        for r in records
    ]
    _emit(rows, CHEB_COLUMNS, args)
    return 0


def cmd_bench(args):
    """Compare the numba and numpy backends on the same problem."""
    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, LEVELMPK_BACKEND=backend)
        code = (
            "import json,sys;import numpy as np;"
            "from levelmpk.cli import parse_gen,_timed;"
            "from levelmpk.executor import prepare,run_plan,build_baseline_plan,warmup;"
            "from levelmpk.plan import build_plan;"
            f"a=parse_gen({args.gen!r});warmup();"
            "x=np.random.default_rng(0).standard_normal(a.n_rows);"
            f"pre=prepare(a,{args.variant!r},{args.pm},{args.cache},0.5,{args.sm});"
            f"plan=build_plan(pre,{args.variant!r},{args.workers});"
            "xp=pre.perm.apply_to_vector(x);"
            f"_,sec,reps=_timed(plan,xp,{args.reps!r});"
            "print(json.dumps({'seconds':sec,'reps':reps}))"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        if out.returncode != 0:
            sys.stderr.write(out.stderr)
            return 1
        stats = json.loads(out.stdout.strip().splitlines()[-1])
        a = parse_gen(args.gen)
        rows.append(
            {
                "backend": backend,
                "variant": args.variant,
                "p_m": args.pm,
                "workers": args.workers,
                "seconds": round(stats["seconds"], 9),
                "gflops": round(2.0 * a.n_nz * args.pm / stats["seconds"] / 1e9, 4),
            }
        )
    _emit(rows, ["backend", "variant", "p_m", "workers", "seconds", "gflops"], args)
    return 0


def _add_common(p, with_variant=True):
    p.add_argument("--matrix", help="Matrix Market file")
    p.add_argument("--gen", help="generator spec: 2d7pt:NXxNY or 3d:N,order=K")
    if with_variant:
        p.add_argument("--variant", default="lb_lg_p2p",
                       help=f"one of {', '.join(VARIANTS)} (comma list where sensible)")
    p.add_argument("--pm", type=int, default=4, help="maximum power p_m")
    p.add_argument("--cache", type=parse_bytes, default="32MiB",
                   help="cache size parameter C (e.g. 35MB, 700KiB)")
    p.add_argument("--f", type=float, default=0.5, help="cache safety factor")
    p.add_argument("--sm", type=int, default=0, help="maximum recursion stage s_m")
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help="worker threads (env LEVELMPK_WORKERS)")
    p.add_argument("--root", type=int, default=0, help="BFS root vertex")
    p.add_argument("--reps", type=int, default=None,
                   help="fixed repetitions (default: adaptive until 1 s total)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for input vectors")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="levelmpk",
        description="Level-blocked sparse matrix power kernels "
                    f"(backend: {backend_name()})",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="time MPK variants")
    _add_common(p)
    p.add_argument("--verify", action="store_true",
                   help="also run the baseline and require bitwise equality")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("scan", help="parameter study over p_m, C, s_m")
    _add_common(p)
    p.add_argument("--pm-list", help="comma list (default: 1,2,3,4,6,8,10,12,14,16)")
    p.add_argument("--cache-list", help="comma list of cache sizes")
    p.add_argument("--sm-list", help="comma list (default: 0,1,2,4,6,20)")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("inspect", help="dump levels, groups, tree, schedule as JSON")
    _add_common(p)
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("traffic", help="cache-model traffic replay")
    _add_common(p)
    p.add_argument("--sim-cache", type=parse_bytes, default=None,
                   help="simulated capacity (default: same as --cache)")
    p.add_argument("--line-bytes", type=int, default=64)
    p.add_argument("--mem-bw", type=float, default=116e9,
                   help="bandwidth for the roofline column [B/s]")
    p.set_defaults(fn=cmd_traffic)

    p = sub.add_parser("cheb", help="Chebyshev heat propagation")
    _add_common(p)
    p.add_argument("--dt", type=float, default=0.05, help="time step")
    p.add_argument("--steps", type=int, default=10, help="number of steps")
    p.add_argument("--tol", type=float, default=1e-4, help="coefficient cutoff")
    p.add_argument("--pm-batch", type=int, default=4,
                   help="recurrence steps per MPK batch")
    p.set_defaults(fn=cmd_cheb)

    p = sub.add_parser("bench", help="compare numba vs numpy backends")
    _add_common(p)
    p.set_defaults(fn=cmd_bench)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"levelmpk: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
