"""Dispatch layer over the hot numeric kernels.

At import time the compiled Cython extension is preferred for the
loop-bound kernels (CSR spmm and the per-sample SVM updates, where tight C
loops beat NumPy by 1.5-100x; see benchmarks/bench_kernels.py). Distance
kernels always run through the BLAS-backed implementations, which outperform
naive compiled loops at this scale and keep results identical whether or not
the extension built. Setting ``ZGE_PURE_PYTHON=1`` (or a failed build)
selects the pure NumPy/SciPy fallback for everything. All kernels use a
deterministic accumulation order, so results are reproducible run to run.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from . import _kernels_py as _dist_impl

if os.environ.get("ZGE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _dist_impl
    HAVE_EXT = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        _impl = _dist_impl
        HAVE_EXT = False

BACKEND = "cython" if HAVE_EXT else "python"


def _as_f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def spmm(A: sp.spmatrix, X: np.ndarray) -> np.ndarray:
    """Sparse @ dense with fixed row-major accumulation order."""
    A = A.tocsr() if not sp.isspmatrix_csr(A) else A
    X = _as_f64(X)
    if A.shape[1] != X.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {X.shape}")
    out = np.empty((A.shape[0], X.shape[1]))
    _impl.csr_spmm(
        np.ascontiguousarray(A.indptr, dtype=np.int64),
        np.ascontiguousarray(A.indices, dtype=np.int64),
        _as_f64(A.data),
        A.shape[1],
        X,
        out,
    )
    return out


def csr_spmm_raw(indptr, indices, data, n_cols: int, X: np.ndarray) -> np.ndarray:
    """spmm on pre-canonicalized CSR arrays (avoids per-call conversion)."""
    X = _as_f64(X)
    out = np.empty((indptr.shape[0] - 1, X.shape[1]))
    _impl.csr_spmm(indptr, indices, data, n_cols, X, out)
    return out


def pairwise_sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of A and the rows of B."""
    A, B = _as_f64(np.atleast_2d(A)), _as_f64(np.atleast_2d(B))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    out = np.empty((A.shape[0], B.shape[0]))
    _dist_impl.pairwise_sqdist(A, B, out)
    return out


def assign_nearest(P: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest row of C per row of P (ties -> lowest index),
    plus the squared distance to it."""
    P, C = _as_f64(np.atleast_2d(P)), _as_f64(np.atleast_2d(C))
    if P.shape[1] != C.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape} vs {C.shape}")
    idx = np.empty(P.shape[0], dtype=np.int64)
    sqd = np.empty(P.shape[0])
    _dist_impl.assign_nearest(P, C, idx, sqd)
    return idx, sqd


def cluster_dist_sums(P: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    """out[i, c] = sum of Euclidean distances from point i to every point
    assigned to cluster c (self-distance contributes 0)."""
    P = _as_f64(np.atleast_2d(P))
    assign = np.ascontiguousarray(assign, dtype=np.int64)
    if assign.shape[0] != P.shape[0]:
        raise ValueError("assignment length does not match point count")
    out = np.zeros((P.shape[0], k))
    _dist_impl.cluster_dist_sums(P, assign, k, out)
    return out


def pegasos_ovr(
    X: np.ndarray, y: np.ndarray, n_classes: int, lam: float, orders: np.ndarray
) -> np.ndarray:
    """One-vs-rest hinge-loss subgradient descent with step 1/(lam*t).

    `orders` holds one visiting permutation per epoch; the caller fixes them
    from its seed so both backends consume identical sample orders.
    """
    X = _as_f64(X)
    y = np.ascontiguousarray(y, dtype=np.int64)
    orders = np.ascontiguousarray(orders, dtype=np.int64)
    W = np.zeros((n_classes, X.shape[1]))
    _impl.pegasos_ovr(X, y, W, float(lam), orders)
    return W
