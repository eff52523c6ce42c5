# cython: language_level=3
"""Compiled batch kernels.  Same contracts as ``fyvi._pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, fabs, fmax

cnp.import_array()

cdef double EPS = np.finfo(float).eps


cdef inline double _term(double u, double r1, int ipow) noexcept nogil:
    # (1 + u) ** (1 / r1); ipow > 0 when 1 / r1 is a small integer
    cdef double b, out
    cdef int e
    if u <= -1.0:
        return 0.0
    if ipow > 0:
        b = 1.0 + u
        out = b
        for e in range(1, ipow):
            out *= b
        return out
    return exp(log1p(u) / r1)


cdef inline double _mass(const double[::1] y, Py_ssize_t k, double a, double r1, int ipow) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t j
    for j in range(k):
        s += _term(r1 * (y[j] - a), r1, ipow)
    return s


cdef int _integer_power(double r1):
    cdef double inv = 1.0 / r1
    if r1 > 0 and inv <= 8 and inv == <int>inv:
        return <int>inv
    return 0


def entmax_bisect_rows(x, double rho, double tol=1e-10, int max_iter=200):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef Py_ssize_t n = xv.shape[0], k = xv.shape[1], i, j
    cdef double r1 = rho - 1.0
    cdef double a_hi = -expm1(-r1 * log(<double>k)) / r1
    p_arr = np.empty((n, k))
    res_arr = np.empty(n)
    ok_arr = np.zeros(n, dtype=bool)
    cdef double[:, ::1] p = p_arr
    cdef double[::1] res = res_arr
    cdef cnp.npy_bool[::1] ok = ok_arr
    cdef double[::1] y = np.empty(k)
    cdef double lo, hi, a, f, m, s
    cdef int it
    cdef int ipow = _integer_power(r1)
    with nogil:
        for i in range(n):
            m = xv[i, 0]
            for j in range(1, k):
                if xv[i, j] > m:
                    m = xv[i, j]
            for j in range(k):
                y[j] = xv[i, j] - m
            lo = 0.0
            hi = a_hi
            a = 0.5 * (lo + hi)
            f = 0.0
            for it in range(max_iter):
                a = 0.5 * (lo + hi)
                f = _mass(y, k, a, r1, ipow) - 1.0
                if fabs(f) <= tol or hi - lo <= 4 * EPS * fmax(1.0, hi):
                    ok[i] = True
                    break
                if f > 0:
                    lo = a
                else:
                    hi = a
            s = 0.0
            for j in range(k):
                p[i, j] = _term(r1 * (y[j] - a), r1, ipow)
                s += p[i, j]
            for j in range(k):
                p[i, j] /= s
            res[i] = fabs(f)
    return p_arr, res_arr, ok_arr


def sparsemax_rows(x):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef Py_ssize_t n = xv.shape[0], k = xv.shape[1], i, j
    cdef double[:, ::1] srt = -np.sort(-np.asarray(xv), axis=1)
    out_arr = np.empty((n, k))
    cdef double[:, ::1] out = out_arr
    cdef double cs, tau, v
    cdef Py_ssize_t supp
    with nogil:
        for i in range(n):
            cs = 0.0
            tau = 0.0
            supp = 0
            for j in range(k):
                cs += srt[i, j]
                if srt[i, j] - (cs - 1.0) / (j + 1) > 0:
                    supp = j + 1
                    tau = (cs - 1.0) / (j + 1)
            for j in range(k):
                v = xv[i, j] - tau
                out[i, j] = v if v > 0 else 0.0
    return out_arr


def softmax_rows(x):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef Py_ssize_t n = xv.shape[0], k = xv.shape[1], i, j
    out_arr = np.empty((n, k))
    cdef double[:, ::1] out = out_arr
    cdef double m, s
    with nogil:
        for i in range(n):
            m = xv[i, 0]
            for j in range(1, k):
                if xv[i, j] > m:
                    m = xv[i, j]
            s = 0.0
            for j in range(k):
                out[i, j] = exp(xv[i, j] - m)
                s += out[i, j]
            for j in range(k):
                out[i, j] /= s
    return out_arr
