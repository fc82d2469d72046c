# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Signatures mirror zge._kernels_py."""

from libc.math cimport sqrt


def csr_spmm(long long[::1] indptr, long long[::1] indices, double[::1] data,
             long long n_cols, double[:, ::1] X, double[:, ::1] out):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t k = X.shape[1]
    cdef Py_ssize_t i, jj, j, c
    cdef double v
    for i in range(n_rows):
        for c in range(k):
            out[i, c] = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            v = data[jj]
            for c in range(k):
                out[i, c] += v * X[j, c]


def pairwise_sqdist(double[:, ::1] A, double[:, ::1] B, double[:, ::1] out):
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double acc, diff
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for c in range(d):
                diff = A[i, c] - B[j, c]
                acc += diff * diff
            out[i, j] = acc


def assign_nearest(double[:, ::1] P, double[:, ::1] C,
                   long long[::1] out_idx, double[::1] out_sqd):
    cdef Py_ssize_t n = P.shape[0], k = C.shape[0], d = P.shape[1]
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t best
    cdef double acc, diff, best_d
    for i in range(n):
        best = 0
        best_d = -1.0
        for j in range(k):
            acc = 0.0
            for c in range(d):
                diff = P[i, c] - C[j, c]
                acc += diff * diff
            if best_d < 0.0 or acc < best_d:
                best_d = acc
                best = j
        out_idx[i] = best
        out_sqd[i] = best_d


def cluster_dist_sums(double[:, ::1] P, long long[::1] assign, long long k,
                      double[:, ::1] out):
    cdef Py_ssize_t n = P.shape[0], d = P.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double acc, diff, dist
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(d):
                diff = P[i, c] - P[j, c]
                acc += diff * diff
            dist = sqrt(acc)
            out[i, assign[j]] += dist
            out[j, assign[i]] += dist


def pegasos_ovr(double[:, ::1] X, long long[::1] y, double[:, ::1] W,
                double lam, long long[:, ::1] orders):
    cdef Py_ssize_t n_classes = W.shape[0], d = W.shape[1]
    cdef Py_ssize_t epochs = orders.shape[0], n = orders.shape[1]
    cdef Py_ssize_t e, s, i, c, j
    cdef long long t = 0
    cdef double decay, eta, score, sign, coef
    for e in range(epochs):
        for s in range(n):
            i = orders[e, s]
            t += 1
            decay = 1.0 - 1.0 / t
            for c in range(n_classes):
                for j in range(d):
                    W[c, j] *= decay
            eta = 1.0 / (lam * t)
            for c in range(n_classes):
                sign = 1.0 if c == y[i] else -1.0
                score = 0.0
                for j in range(d):
                    score += W[c, j] * X[i, j]
                if sign * score < 1.0:
                    coef = eta * sign
                    for j in range(d):
                        W[c, j] += coef * X[i, j]
