"""Compiled vs numpy kernels: projection, separable objective, one full solve.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

The full-solve row runs in a subprocess per backend because the backend is
fixed at import time (``MUDALLOC_PURE_PYTHON``).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mudalloc import _pykernels

try:
    from mudalloc import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

SOLVE_SNIPPET = """
import time, warnings
warnings.simplefilter("ignore")
from mudalloc import ScenarioConfig, build_scenario, solve, BACKEND
sc = build_scenario(ScenarioConfig(rng_seed=1))
best = float("inf")
for _ in range({repeat}):
    t = time.perf_counter(); solve(sc, 3, 0); best = min(best, time.perf_counter() - t)
print(BACKEND, best)
"""


def bench(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        sys.exit("compiled extension not built: python setup.py build_ext --inplace")

    rng = np.random.default_rng(0)
    cases = {
        "project 32x8 loose (q_s=3, q_l=0)": (rng.normal(0.3, 0.5, (32, 8)), 3.0, 0.0),
        "project 32x8 tight (q_s=4, q_l=1)": (rng.normal(0.3, 0.5, (32, 8)), 4.0, 1.0),
        "project 32x8 tight (q_s=24, q_l=6)": (rng.normal(0.7, 0.5, (32, 8)), 24.0, 6.0),
    }
    print(f"{'kernel':40s} {'numpy [ms]':>11s} {'compiled [ms]':>14s} {'speed-up':>9s}")
    for name, (p, qs, ql) in cases.items():
        tp = bench(lambda: _pykernels.dykstra_project(p, qs, ql, 1e-9, 200000), args.repeat, 3)
        tc = bench(lambda: _ckernels.dykstra_project(p, qs, ql, 1e-9, 200000), args.repeat, 3)
        print(f"{name:40s} {1e3 * tp:11.3f} {1e3 * tc:14.3f} {tp / tc:8.1f}x")

    q, c, w = rng.random((32, 8)), rng.random((32, 8)), rng.normal(size=(32, 8))
    tp = bench(lambda: _pykernels.separable_sqrt_linear(q, c, w, 1e-12), args.repeat, 2000)
    tc = bench(lambda: _ckernels.separable_sqrt_linear(q, c, w, 1e-12), args.repeat, 2000)
    print(f"{'separable sqrt-linear 32x8':40s} {1e3 * tp:11.4f} {1e3 * tc:14.4f} {tp / tc:8.1f}x")

    times = {}
    for forced in ("1", "0"):
        env = dict(os.environ, MUDALLOC_PURE_PYTHON=forced)
        out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(repeat=min(args.repeat, 3))],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        times[out[0]] = float(out[1])
    tp, tc = times["python"], times["compiled"]
    print(f"{'full solve, default scenario':40s} {1e3 * tp:11.1f} {1e3 * tc:14.1f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
