# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels; same arithmetic order as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def rotate_batch(D, double alpha, double beta, double q):
    cdef const double[:, ::1] d = np.ascontiguousarray(D, dtype=np.float64)
    cdef Py_ssize_t k = d.shape[0], n = d.shape[1], r, i
    out = np.empty((k, n), dtype=np.float64)
    cdef double[:, ::1] x = out
    cdef double a, b, s, h
    for r in range(k):
        if n == 1:
            x[r, 0] = d[r, 0] + (alpha * d[r, 0] + beta * 0.0)
            continue
        a = d[r, n - 1]
        s = d[r, 0]
        for i in range(1, n - 1):
            s = s + d[r, i]
        b = s * q
        x[r, n - 1] = d[r, n - 1] + (alpha * a + beta * b)
        h = (alpha * b - beta * a) * q
        for i in range(n - 1):
            x[r, i] = d[r, i] + h
    return out


def evaluate_batch(Y, t, double eps, double alpha, double beta, double q):
    cdef const double[:, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t k = y.shape[0], n = y.shape[1], r, i
    f_out = np.empty(k, dtype=np.float64)
    nu_out = np.empty(k, dtype=np.float64)
    cdef double[::1] fo = f_out
    cdef double[::1] no = nu_out
    cdef double[::1] d = np.empty(n, dtype=np.float64)
    cdef double[::1] x = np.empty(n, dtype=np.float64)
    cdef double a, b, s, h, acc, v, p
    for r in range(k):
        for i in range(n):
            d[i] = y[r, i] - tv[i]
        if n == 1:
            x[0] = d[0] + (alpha * d[0] + beta * 0.0)
        else:
            a = d[n - 1]
            s = d[0]
            for i in range(1, n - 1):
                s = s + d[i]
            b = s * q
            x[n - 1] = d[n - 1] + (alpha * a + beta * b)
            h = (alpha * b - beta * a) * q
            for i in range(n - 1):
                x[i] = d[i] + h
        # rows of the upper block, then the lower block
        v = x[0] - 1.0
        acc = v if v > 0.0 else 0.0
        for i in range(1, n):
            p = eps * x[i - 1]
            v = (x[i] + p) - 1.0
            acc = acc + (v if v > 0.0 else 0.0)
        v = -x[0]
        acc = acc + (v if v > 0.0 else 0.0)
        for i in range(1, n):
            p = eps * x[i - 1]
            v = p - x[i]
            acc = acc + (v if v > 0.0 else 0.0)
        fo[r] = y[r, n - 1]
        no[r] = acc
    return f_out, nu_out


def improvement_indices(f, nu, double best_f, double best_nu):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[::1] nv = np.ascontiguousarray(nu, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0], j, m = 0
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    for j in range(n):
        if nv[j] < best_nu or (nv[j] == best_nu and fv[j] < best_f):
            o[m] = j
            m += 1
            best_f = fv[j]
            best_nu = nv[j]
    return out[:m]
