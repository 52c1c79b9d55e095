"""Time the numba and pure-numpy flavours of every hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

The first numba call compiles (or loads from cache); it is excluded from the
timings and reported separately.
"""
import argparse
import json
import time

import numpy as np

from fredproj import _kernels as K


def cases(rng):
    d = 200
    M = rng.standard_normal((d, d))
    M *= 0.9 / np.linalg.norm(M, 2)
    w = rng.uniform(0.5, 2.0, d)
    phi = rng.standard_normal(d)
    small = rng.standard_normal((12, 12))
    small *= 0.8 / np.linalg.norm(small, 2)
    T = 40
    terms = rng.standard_normal((T, T, 6, 6))
    ia, ib = K.py_sigma_batch(np.arange(T * (T + 1) // 2))
    Xs, Ys = rng.standard_normal((2, 60, 6, 6))
    x, qw = np.polynomial.legendre.leggauss(400)
    return {
        "sigma_batch": (np.arange(1_000_000, dtype=np.int64),),
        "neumann_vector": (M, w, phi, 0.9, 1e-12, 10_000),
        "neumann_matrix": (small, np.ones(12), 0.8, 1e-13, 5000),
        "sum_in_order": (terms, ia, ib),
        "cauchy_diagonal": (Xs, Ys, 60),
        "assemble_separable": (x, qw, np.array([1.0, 2.0, -1.0]), np.array([0.5, 1.0]), 1.0),
        "assemble_sine": (x, qw, 1.0),
    }


def best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write the timings here as well")
    args = ap.parse_args(argv)
    if K.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rows = []
    for name, fargs in cases(np.random.default_rng(args.seed)).items():
        py = getattr(K, "py_" + name)
        nb = getattr(K, "nb_" + name)
        t0 = time.perf_counter()
        nb(*fargs)
        first = time.perf_counter() - t0
        t_py = best_of(py, fargs, args.repeat)
        t_nb = best_of(nb, fargs, args.repeat)
        rows.append({"kernel": name, "numpy_s": t_py, "numba_s": t_nb,
                     "speedup": t_py / t_nb, "numba_first_call_s": first})

    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'1st call [ms]':>15}")
    for r in rows:
        print(f"{r['kernel']:<20}{1e3 * r['numpy_s']:>12.3f}{1e3 * r['numba_s']:>12.3f}"
              f"{r['speedup']:>10.2f}{1e3 * r['numba_first_call_s']:>15.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
