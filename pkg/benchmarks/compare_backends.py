#!/usr/bin/env python3
"""Compare the numba and numpy backends across problem sizes and variants.

Each measurement runs in a subprocess so the backend env flag takes effect
at import time.  Reports min-of-N wall times and the derived Gflop/s.

    python benchmarks/compare_backends.py [--samples 20] [--workers N]
"""

import argparse
import json
import os
import subprocess
import sys

CASES = [
    ("2d7pt:64x64", "baseline", 4),
    ("2d7pt:64x64", "lb_lg_p2p", 4),
    ("3d:24,order=2", "baseline", 4),
    ("3d:24,order=2", "lb_lg_p2p", 4),
    ("3d:24,order=2", "lb_lg_p2p_rec", 8),
    ("3d:16,order=4", "lb_lg_p2p", 4),
]

SNIPPET = r"""
import json, time
import numpy as np
from levelmpk.cli import parse_gen
from levelmpk.executor import build_baseline_plan, prepare, run_plan, warmup
from levelmpk.plan import build_plan
from levelmpk.backend import backend_name

gen, variant, pm, workers, samples = __CASE__
a = parse_gen(gen)
warmup()
x = np.random.default_rng(0).standard_normal(a.n_rows)
if variant == "baseline":
    plan = build_baseline_plan(a, pm, workers)
    xr = x
else:
    pre = prepare(a, variant, pm, 12 * a.n_nz // 4, s_m=2)
    plan = build_plan(pre, variant, workers)
    xr = pre.perm.apply_to_vector(x)
run_plan(plan, x=xr)
best = min(run_plan(plan, x=xr).seconds for _ in range(samples))
print(json.dumps({"backend": backend_name(), "seconds": best,
                  "gflops": 2.0 * a.n_nz * pm / best / 1e9}))
"""


def measure(backend, gen, variant, pm, workers, samples):
    env = dict(os.environ, LEVELMPK_BACKEND=backend)
    code = SNIPPET.replace("__CASE__", repr((gen, variant, pm, workers, samples)))
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    print(f"{'matrix':<16} {'variant':<14} {'p_m':>3} "
          f"{'numba [ms]':>11} {'numpy [ms]':>11} {'numba/numpy':>12}")
    for gen, variant, pm in CASES:
        nb = measure("numba", gen, variant, pm, args.workers, args.samples)
        np_ = measure("numpy", gen, variant, pm, args.workers, args.samples)
        print(f"{gen:<16} {variant:<14} {pm:>3} "
              f"{nb['seconds'] * 1e3:>11.3f} {np_['seconds'] * 1e3:>11.3f} "
              f"{nb['seconds'] / np_['seconds']:>12.2f}")


if __name__ == "__main__":
    main()
