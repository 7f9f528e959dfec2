"""Numba vs numpy timings for the solver and peak-shaving kernels.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--end-to-end]

Each kernel twin is called on the same inputs; the first numba call (compile
or cache load) is excluded. ``--end-to-end`` also solves a batch of random
MILPs in two subprocesses, one per ``GRIDSTORE_NUMBA`` setting.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np
import scipy.sparse as sp

from gridstore.solver import kernels


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        fresh = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
        t0 = time.perf_counter()
        fn(*fresh)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n = 4000
    d = rng.normal(size=n)
    status = rng.integers(0, 5, size=n).astype(np.int64)
    yield "select_entering", kernels.select_entering_nb, kernels.select_entering_np, (d, status, 1e-9, False)

    m = 2000
    lb = rng.uniform(-5, 0, size=m)
    ub = lb + rng.uniform(0, 10, size=m)
    xb = rng.uniform(-4, 10, size=m)
    delta = rng.normal(size=m)
    head = rng.permutation(m).astype(np.int64)
    yield ("ratio_test", kernels.ratio_test_nb, kernels.ratio_test_np,
           (xb, lb, ub, delta, head, np.inf, 1e-7, 1e-9, False))

    m, n_eta = 1500, 300
    piv = rng.integers(0, m, size=n_eta).astype(np.int64)
    pval = rng.uniform(0.5, 2.0, size=n_eta)
    counts = rng.integers(1, 40, size=n_eta)
    idx = rng.integers(0, m, size=counts.sum()).astype(np.int64)
    start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    val = rng.normal(size=idx.size)
    vec = rng.normal(size=m)
    eta = (vec, piv, pval, start, idx, val, n_eta)
    yield "eta_ftran", kernels.eta_ftran_nb, kernels.eta_ftran_np, eta
    yield "eta_btran", kernels.eta_btran_nb, kernels.eta_btran_np, eta

    rows, cols = 600, 800
    A = sp.random(rows, cols, density=0.01, random_state=1, format="csr")
    rlo = np.full(rows, -np.inf)
    rhi = np.abs(A) @ np.ones(cols)
    yield ("propagate", kernels.propagate_nb, kernels.propagate_np,
           (A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, rlo, rhi,
            np.zeros(cols), np.full(cols, 5.0), rng.random(cols) < 0.5, 1e-6, 20))

    load = np.sort(rng.uniform(0, 100, size=8760))[::-1].copy()
    yield "flattened_peak", kernels.flattened_peak_nb, kernels.flattened_peak_np, (load, 0.83)


SCRIPT = """
import sys, time
import numpy as np
sys.path.insert(0, {tests!r})
from oracles import random_milp
from gridstore.solver import SolverOptions, solve_milp
rng = np.random.default_rng(3)
probs = [random_milp(rng, n_bin=10, n_cont=6, m=8) for _ in range(30)]
solve_milp(probs[0])
t0 = time.perf_counter()
for p in probs:
    solve_milp(p, SolverOptions(mip_gap=0.0))
print(time.perf_counter() - t0)
"""


def end_to_end():
    tests = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "tests")
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, GRIDSTORE_NUMBA=flag)
        run = subprocess.run([sys.executable, "-c", SCRIPT.format(tests=tests)], env=env,
                             capture_output=True, text=True, check=True)
        out[flag] = float(run.stdout.strip())
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'numba (us)':>12}{'numpy (us)':>12}{'speedup':>10}")
    for name, nb, npf, inputs in cases(rng):
        nb(*[a.copy() if isinstance(a, np.ndarray) else a for a in inputs])
        t_nb = best_of(nb, inputs, args.repeat)
        t_np = best_of(npf, inputs, args.repeat)
        print(f"{name:<16}{t_nb * 1e6:>12.1f}{t_np * 1e6:>12.1f}{t_np / t_nb:>9.1f}x")

    if args.end_to_end:
        t = end_to_end()
        print(f"\n30 MILPs, branch and bound: numba {t['1']:.2f} s, numpy {t['0']:.2f} s "
              f"({t['0'] / t['1']:.1f}x)")


if __name__ == "__main__":
    main()
