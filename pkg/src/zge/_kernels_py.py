"""Pure NumPy/SciPy kernels, used when the compiled extension is absent.

Same call signatures as the Cython module ``zge._kernels``: every function
fills a caller-allocated output buffer.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

_BLOCK = 8192


def csr_spmm(indptr, indices, data, n_cols, X, out):
    n_rows = indptr.shape[0] - 1
    A = sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols))
    out[:] = A @ X


def pairwise_sqdist(A, B, out):
    # Gram expansion, clamped: tiny negatives from cancellation become 0.
    bb = np.einsum("ij,ij->i", B, B)
    for start in range(0, A.shape[0], _BLOCK):
        stop = min(start + _BLOCK, A.shape[0])
        blk = A[start:stop]
        aa = np.einsum("ij,ij->i", blk, blk)
        d = aa[:, None] + bb[None, :] - 2.0 * (blk @ B.T)
        np.maximum(d, 0.0, out=d)
        out[start:stop] = d


def assign_nearest(P, C, out_idx, out_sqd):
    for start in range(0, P.shape[0], _BLOCK):
        stop = min(start + _BLOCK, P.shape[0])
        d = np.empty((stop - start, C.shape[0]))
        pairwise_sqdist(P[start:stop], C, d)
        idx = np.argmin(d, axis=1)
        out_idx[start:stop] = idx
        out_sqd[start:stop] = d[np.arange(stop - start), idx]


def cluster_dist_sums(P, assign, k, out):
    onehot = np.zeros((P.shape[0], k))
    onehot[np.arange(P.shape[0]), assign] = 1.0
    for start in range(0, P.shape[0], _BLOCK):
        stop = min(start + _BLOCK, P.shape[0])
        d = np.empty((stop - start, P.shape[0]))
        pairwise_sqdist(P[start:stop], P, d)
        # self-distances are exactly 0; clear Gram-cancellation noise
        d[np.arange(stop - start), np.arange(start, stop)] = 0.0
        np.sqrt(d, out=d)
        out[start:stop] = d @ onehot


def pegasos_ovr(X, y, W, lam, orders):
    n_classes = W.shape[0]
    t = 0
    for epoch in range(orders.shape[0]):
        for i in orders[epoch]:
            t += 1
            W *= 1.0 - 1.0 / t
            x = X[i]
            scores = W @ x
            signs = np.where(np.arange(n_classes) == y[i], 1.0, -1.0)
            viol = signs * scores < 1.0
            if viol.any():
                eta = 1.0 / (lam * t)
                W[viol] += np.outer(eta * signs[viol], x)
