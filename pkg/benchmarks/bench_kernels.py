"""Time the numba kernels against their pure-numpy fallbacks.

Runs every kernel on representative problem sizes and prints one table
row per (kernel, size): best-of-batch time for each implementation, the
speedup, and the max abs output difference as a cross-check.  With
numba missing only the numpy column is reported.

Usage: python3 benchmarks/bench_kernels.py [--reps N]
"""

import argparse
import time

import numpy as np

from sparsemtl.kernels import NUMBA_IMPLS, NUMPY_IMPLS


def make_cases(rng):
    cases = []

    for n, k in ((13, 3), (200, 10)):
        w = rng.normal(size=n)
        cases.append(("ksupport_norm_sq", "n=%d k=%d" % (n, k), (w, k)))
        cases.append(("prox_sq_ksupport", "n=%d k=%d" % (n, k), (w, 0.3, k)))

    for n in (25, 500):
        v = rng.normal(size=n)
        cases.append(("project_l1_ball", "n=%d" % n, (v, 1.5)))

    for shape in ((25, 13), (500, 50)):
        X = rng.normal(size=shape)
        cases.append(("prox_l1_inf_rows", "%dx%d" % shape, (X, 0.7)))

    n, K = 50, 13
    A = rng.normal(size=(n, K))
    y = A @ rng.normal(size=K) + 0.1 * rng.normal(size=n)
    G = A.T @ A
    b = A.T @ y
    const = 0.5 * float(y @ y)
    v0 = np.zeros(K)
    cases.append((
        "fista_sq", "n=%d K=%d" % (n, K),
        (G, b, const, n, v0, 0.125, 3, 1.0, 1000, 1e-8, 0.5),
    ))
    ylab = np.where(y >= np.median(y), 1.0, -1.0)
    At = np.ascontiguousarray(A.T)
    cases.append((
        "fista_logistic", "n=%d K=%d" % (n, K),
        (A, At, ylab, v0, 0.125, 3, 1.0, 1000, 1e-8, 0.5),
    ))
    return cases


def best_time(fn, args, reps, batches=5):
    best = np.inf
    for _ in range(batches):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def first_array(out):
    if isinstance(out, tuple):
        out = out[0]
    return np.atleast_1d(np.asarray(out, dtype=np.float64))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200,
                    help="calls per timing batch (default 200)")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    if NUMBA_IMPLS is None:
        print("numba not installed; timing the numpy fallback only")
        print("%-18s %-12s %12s" % ("kernel", "size", "numpy"))
        for name, size, call_args in cases:
            t = best_time(NUMPY_IMPLS[name], call_args, args.reps)
            print("%-18s %-12s %10.1fus" % (name, size, t * 1e6))
        return 0

    # first calls trigger compilation; keep that out of the timings
    for name, _, call_args in cases:
        NUMBA_IMPLS[name](*call_args)

    print("%-18s %-12s %12s %12s %9s %11s" %
          ("kernel", "size", "numpy", "numba", "speedup", "max|diff|"))
    for name, size, call_args in cases:
        t_np = best_time(NUMPY_IMPLS[name], call_args, args.reps)
        t_nb = best_time(NUMBA_IMPLS[name], call_args, args.reps)
        diff = float(np.abs(
            first_array(NUMPY_IMPLS[name](*call_args))
            - first_array(NUMBA_IMPLS[name](*call_args))
        ).max())
        print("%-18s %-12s %10.1fus %10.1fus %8.1fx %11.1e" %
              (name, size, t_np * 1e6, t_nb * 1e6, t_np / t_nb, diff))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
