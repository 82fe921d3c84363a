"""Compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per kernel and backend, the speedup, and
whether the outputs agree (they must, bit for bit for the enumeration
kernel and exactly for the seeded Metropolis chain).
"""
import argparse
import time

import numpy as np

from merlab import _backend, _fallback


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def seq_weights_case(rng):
    K, A, n = 4, 16, 5
    prior = rng.dirichlet(np.ones(K))
    lik_t = np.ascontiguousarray(rng.dirichlet(np.ones(A), size=K).T)
    return (prior, lik_t, n, 0, A ** n)


def rwm_case(rng):
    n, d, S = 200, 2, 20_000
    phi = np.ascontiguousarray(rng.uniform(-1, 1, (n, d)))
    y = (rng.random(n) < 0.5).astype(np.float64)
    steps = np.ascontiguousarray(0.3 * rng.standard_normal((S, d)))
    log_u = np.log(rng.random(S))
    lo, hi = np.full(d, -2.0), np.full(d, 2.0)
    return (phi, y, np.zeros(d), steps, log_u, 1, 1.0, 0.0, lo, hi)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    comp = _backend.compiled()
    rng = np.random.default_rng(12345)
    cases = [("seq_weights", seq_weights_case(rng)), ("rwm_logistic", rwm_case(rng))]
    print(f"backend in use: {_backend.BACKEND}")
    print(f"{'kernel':<14}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}  agree")
    for name, case in cases:
        t_py, out_py = _best(lambda: getattr(_fallback, name)(*case), max(1, args.repeat // 2))
        if comp is None:
            print(f"{name:<14}{t_py:>12.4f}{'n/a':>12}{'':>10}  (extension not built)")
            continue
        t_cy, out_cy = _best(lambda: getattr(comp, name)(*case), args.repeat)
        if name == "rwm_logistic":
            agree = out_py[1] == out_cy[1] and np.array_equal(out_py[0], out_cy[0])
        else:
            agree = np.array_equal(out_py, out_cy)
        print(f"{name:<14}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
