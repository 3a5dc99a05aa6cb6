# cython: language_level=3
"""Compiled inner loops. Mirrors ``nlmc._pykernels`` call for call."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs

cnp.import_array()


def flux_sum_batched(const double[:, ::1] P, const double[:, :, ::1] X,
                     const double[:, :, ::1] NW, double expo):
    """out[b] = sum_k ((X[b,k] - P[b]) . NW[b,k]) / |X[b,k] - P[b]|**expo"""
    cdef Py_ssize_t B = X.shape[0], K = X.shape[1], n = X.shape[2]
    cdef Py_ssize_t b, k, d
    cdef double acc, dot, r2, diff
    cdef double half = 0.5 * expo
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for b in range(B):
            acc = 0.0
            for k in range(K):
                dot = 0.0
                r2 = 0.0
                for d in range(n):
                    diff = X[b, k, d] - P[b, d]
                    dot = dot + diff * NW[b, k, d]
                    r2 = r2 + diff * diff
                acc = acc + dot / pow(r2, half)
            o[b] = acc
    return out


def flux_sum_shared(const double[:, ::1] P, const double[:, ::1] X,
                    const double[:, ::1] NW, double expo):
    """Same as ``flux_sum_batched`` with one node set shared by all targets."""
    cdef Py_ssize_t B = P.shape[0], K = X.shape[0], n = X.shape[1]
    cdef Py_ssize_t b, k, d
    cdef double acc, dot, r2, diff
    cdef double half = 0.5 * expo
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for b in range(B):
            acc = 0.0
            for k in range(K):
                dot = 0.0
                r2 = 0.0
                for d in range(n):
                    diff = X[k, d] - P[b, d]
                    dot = dot + diff * NW[k, d]
                    r2 = r2 + diff * diff
                acc = acc + dot / pow(r2, half)
            o[b] = acc
    return out


def lipschitz_sup(const double[:, ::1] P, const double[::1] H, double hmin):
    """Largest |H_i - H_j| / |P_i - P_j| over pairs with |P_i - P_j| >= hmin.

    Returns (value, i, j); value is -1 when no pair qualifies.
    """
    cdef Py_ssize_t M = P.shape[0], n = P.shape[1]
    cdef Py_ssize_t i, j, d, bi = -1, bj = -1
    cdef double best = -1.0, r2, diff, q
    cdef double h2 = hmin * hmin
    with nogil:
        for i in range(M):
            for j in range(i + 1, M):
                r2 = 0.0
                for d in range(n):
                    diff = P[i, d] - P[j, d]
                    r2 = r2 + diff * diff
                if r2 < h2:
                    continue
                q = fabs(H[i] - H[j]) / sqrt(r2)
                if q > best:
                    best = q
                    bi = i
                    bj = j
    return best, bi, bj


def rotate_nodes(const double[:, :, ::1] R, const double[:, ::1] L):
    """out[b, k] = R[b] @ L[k], renormalized to unit length."""
    cdef Py_ssize_t B = R.shape[0], K = L.shape[0], n = L.shape[1]
    cdef Py_ssize_t b, k, i, j
    cdef double acc, nrm
    cdef double v[3]
    out = np.empty((B, K, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for b in range(B):
            for k in range(K):
                nrm = 0.0
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc = acc + R[b, i, j] * L[k, j]
                    v[i] = acc
                    nrm = nrm + acc * acc
                nrm = sqrt(nrm)
                for i in range(n):
                    o[b, k, i] = v[i] / nrm
    return out
