# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: pairwise squared distances and log-domain Sinkhorn.

Mirrors ``_pure`` exactly in algorithm and update order; only the
summation strategy differs (sequential C loops instead of numpy
reductions), which keeps results equal to the fallback within a few ulp.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()


def pairwise_sq_dists(double[:, ::1] x, double[:, ::1] y):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t dim = x.shape[1]
    if y.shape[1] != dim:
        raise ValueError("dimension mismatch in pairwise_sq_dists")
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double s, d
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(dim):
                d = x[i, k] - y[j, k]
                s += d * d
            out[i, j] = s
    return out_arr


def sinkhorn_log(double[:, ::1] cost, double[::1] a, double[::1] b,
                 double zeta, int max_iter, double tol):
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t m = cost.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] plan_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] plan = plan_arr
    cdef double[::1] u = np.zeros(n)
    cdef double[::1] v = np.zeros(m)
    cdef double[::1] log_a = np.empty(n)
    cdef double[::1] log_b = np.empty(m)
    cdef double[::1] row_sum = np.empty(n)
    cdef double[::1] col_sum = np.empty(m)
    cdef Py_ssize_t i, j, it
    cdef double peak, acc, err_row, err_col, err, t
    cdef bint converged = False
    cdef int iters = 0

    for i in range(n):
        log_a[i] = log(a[i])
    for j in range(m):
        log_b[j] = log(b[j])

    err = np.inf
    for it in range(1, max_iter + 1):
        iters = it
        # u update: u_i = log a_i - lse_j(-zeta C_ij + v_j)
        for i in range(n):
            peak = -zeta * cost[i, 0] + v[0]
            for j in range(1, m):
                t = -zeta * cost[i, j] + v[j]
                if t > peak:
                    peak = t
            acc = 0.0
            for j in range(m):
                acc += exp(-zeta * cost[i, j] + v[j] - peak)
            u[i] = log_a[i] - (peak + log(acc))
        # v update: v_j = log b_j - lse_i(-zeta C_ij + u_i)
        for j in range(m):
            peak = -zeta * cost[0, j] + u[0]
            for i in range(1, n):
                t = -zeta * cost[i, j] + u[i]
                if t > peak:
                    peak = t
            acc = 0.0
            for i in range(n):
                acc += exp(-zeta * cost[i, j] + u[i] - peak)
            v[j] = log_b[j] - (peak + log(acc))
        # marginal error of the current plan
        for i in range(n):
            row_sum[i] = 0.0
        for j in range(m):
            col_sum[j] = 0.0
        for i in range(n):
            for j in range(m):
                t = exp(-zeta * cost[i, j] + u[i] + v[j])
                plan[i, j] = t
                row_sum[i] += t
                col_sum[j] += t
        err_row = 0.0
        for i in range(n):
            err_row += fabs(row_sum[i] - a[i])
        err_col = 0.0
        for j in range(m):
            err_col += fabs(col_sum[j] - b[j])
        err = err_row if err_row > err_col else err_col
        if err < tol:
            converged = True
            break

    return plan_arr, iters, converged, err
