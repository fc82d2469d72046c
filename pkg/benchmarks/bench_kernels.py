#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy/SciPy fallback.

Run after installing the package:

    python3 benchmarks/bench_kernels.py [--scale {small,citation}]

The "citation" scale mirrors the largest benchmark graph this package
targets (~20k nodes, 200-dim embeddings).
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

import zge._kernels_py as py_impl

try:
    import zge._kernels as cy_impl
except ImportError:
    cy_impl = None


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(name, make_args, runner, repeats=3):
    args_py = make_args()
    t_py = timeit(lambda: runner(py_impl, *args_py), repeats)
    row = [name, f"{t_py * 1e3:10.2f}"]
    if cy_impl is not None:
        args_cy = make_args()
        t_cy = timeit(lambda: runner(cy_impl, *args_cy), repeats)
        row += [f"{t_cy * 1e3:10.2f}", f"{t_py / t_cy:8.2f}x"]
    else:
        row += ["         -", "       -"]
    print("  ".join(f"{c:>24}" if i == 0 else c for i, c in enumerate(row)))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=("small", "citation"), default="citation")
    args = parser.parse_args()

    if args.scale == "citation":
        n, nnz_per_row, dim, hidden = 20000, 6, 200, 200
        sil_n, svm_n, svm_epochs = 2000, 8000, 10
    else:
        n, nnz_per_row, dim, hidden = 2000, 6, 50, 50
        sil_n, svm_n, svm_epochs = 500, 1000, 10

    rng = np.random.default_rng(0)
    print(f"scale={args.scale}  (extension {'present' if cy_impl else 'MISSING'})")
    print(f"{'kernel':>24}  {'python ms':>10}  {'cython ms':>10}  {'speedup':>8}")

    A = sp.random(n, n, density=nnz_per_row / n, random_state=1, format="csr")
    X = rng.standard_normal((n, dim))

    def spmm_args():
        return (
            A.indptr.astype(np.int64),
            A.indices.astype(np.int64),
            A.data.astype(np.float64),
            n,
            np.ascontiguousarray(X),
            np.empty((n, dim)),
        )

    bench_case(
        f"csr_spmm {n}x{n} @ {dim}",
        spmm_args,
        lambda impl, *a: impl.csr_spmm(*a),
    )

    P = rng.standard_normal((n, hidden))
    C = rng.standard_normal((10, hidden))

    bench_case(
        f"assign_nearest {n}x10",
        lambda: (
            np.ascontiguousarray(P),
            np.ascontiguousarray(C),
            np.empty(n, dtype=np.int64),
            np.empty(n),
        ),
        lambda impl, *a: impl.assign_nearest(*a),
    )

    S = rng.standard_normal((sil_n, hidden))
    assign = rng.integers(0, 6, size=sil_n).astype(np.int64)

    bench_case(
        f"cluster_dist_sums {sil_n}^2",
        lambda: (np.ascontiguousarray(S), assign, 6, np.zeros((sil_n, 6))),
        lambda impl, *a: impl.cluster_dist_sums(*a),
        repeats=2,
    )

    Xs = rng.standard_normal((svm_n, hidden))
    y = rng.integers(0, 2, size=svm_n).astype(np.int64)
    orders = np.stack(
        [np.random.default_rng(s).permutation(svm_n) for s in range(svm_epochs)]
    ).astype(np.int64)

    bench_case(
        f"pegasos {svm_n}x{hidden} {svm_epochs}ep",
        lambda: (np.ascontiguousarray(Xs), y, np.zeros((2, hidden)), 1.0 / svm_n, orders),
        lambda impl, *a: impl.pegasos_ovr(*a),
        repeats=1,
    )


if __name__ == "__main__":
    main()
