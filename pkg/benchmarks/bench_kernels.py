"""Timing of the compiled trajectory kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N] [--json]``.
Every kernel is timed on the same inputs in both backends and the
outputs are compared, so a speed-up is only reported for matching
results.
"""
import argparse
import json
import math
import sys
import time

import numpy as np

from fermi_accel import kernels
from fermi_accel.classical import EnsembleSpec, sample_ensemble


def hard_case(n):
    ens = sample_ensemble(EnsembleSpec(n, 0.0, 2 * math.pi ** 2, 0.1, 0.1, seed=1), hard_wall=True)
    times = np.linspace(0.0, 300.0, 101)

    def call(impl):
        shape = (len(ens), len(times))
        z, p = np.zeros(shape), np.zeros(shape)
        nb = np.zeros(shape, dtype=np.int64)
        st = np.zeros(len(ens), dtype=np.int8)
        impl.evolve_hard(ens.z, ens.p, 1.7, 0.0, times, 2 * math.pi / 64, 1e6, 10 ** 6,
                         z, p, nb, st, 0, len(ens))
        return p

    return call


def soft_case(n):
    ens = sample_ensemble(EnsembleSpec(n, 5.0, 0.0, 1.0, 0.5, seed=2))
    times = np.linspace(0.0, 20.0, 21)

    def call(impl):
        shape = (len(ens), len(times))
        z, p = np.zeros(shape), np.zeros(shape)
        nb = np.zeros(shape, dtype=np.int64)
        st = np.zeros(len(ens), dtype=np.int8)
        cl = np.zeros(len(ens), dtype=np.int64)
        impl.evolve_soft(ens.z, ens.p, 1.7, 4.0, 1.0, 0.0, 1e-3, 50.0, times,
                         z, p, nb, st, cl, 0, len(ens))
        return p

    return call


def map_case(n):
    rng = np.random.default_rng(3)
    th0 = rng.uniform(0, 2 * math.pi, n)
    p0 = rng.uniform(0, 2 * math.pi, n)

    def call(impl):
        th, p = th0.copy(), p0.copy()
        impl.standard_map(th, p, 12.0, 500)
        return p

    return call


CASES = {
    "evolve_hard (t=300)": (hard_case, 200),
    "evolve_soft (t=20, dt=1e-3)": (soft_case, 20),
    "standard_map (500 steps)": (map_case, 2000),
}


def best_of(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    python = kernels.load("python")
    try:
        compiled = kernels.load("compiled")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 1
    rows = []
    for name, (make, n) in CASES.items():
        call = make(n)
        tc, oc = best_of(lambda: call(compiled), args.repeat)
        tp, op = best_of(lambda: call(python), 1)
        agree = bool(np.allclose(oc, op, rtol=1e-6, atol=1e-6, equal_nan=True))
        rows.append({"kernel": name, "particles": n, "compiled_s": tc, "python_s": tp,
                     "speedup": tp / tc, "outputs_match": agree})
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'kernel':<30} {'n':>6} {'compiled':>10} {'python':>10} {'speed-up':>9}  match")
        for r in rows:
            print(f"{r['kernel']:<30} {r['particles']:>6} {r['compiled_s']:>9.4f}s "
                  f"{r['python_s']:>9.3f}s {r['speedup']:>8.0f}x  {r['outputs_match']}")
    return 0 if all(r["outputs_match"] for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
