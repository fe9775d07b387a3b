# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.  Drop-in replacement for ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

from .errors import NumericalError, SingularMatrixError

cnp.import_array()

cdef double PIVOT_RTOL = 1e-14


def lu_factor(a, bint pivoting=True):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] arr = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] lu = arr
    cdef Py_ssize_t n = lu.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] perm = parr
    cdef double[::1] scale = np.abs(arr).max(axis=1) if n else np.zeros(0)
    cdef Py_ssize_t i, j, k, p
    cdef double big, v, pivot, f
    cdef cnp.int64_t ti
    cdef int sign = 1
    for k in range(n):
        p = k
        big = fabs(lu[k, k])
        for i in range(k + 1, n if pivoting else k + 1):
            v = fabs(lu[i, k])
            if v > big:
                big = v
                p = i
        if p != k:
            for j in range(n):
                v = lu[k, j]
                lu[k, j] = lu[p, j]
                lu[p, j] = v
            ti = perm[k]
            perm[k] = perm[p]
            perm[p] = ti
            sign = -sign
        pivot = lu[k, k]
        if pivot == 0.0 or fabs(pivot) <= PIVOT_RTOL * scale[perm[k]]:
            raise SingularMatrixError(f"matrix is singular at pivot {k}")
        for i in range(k + 1, n):
            f = lu[i, k] / pivot
            lu[i, k] = f
            if f != 0.0:
                for j in range(k + 1, n):
                    lu[i, j] -= f * lu[k, j]
    return arr, parr, sign


def lu_solve(lu_in, perm_in, b):
    cdef const double[:, ::1] lu = np.ascontiguousarray(lu_in, dtype=np.float64)
    cdef const cnp.int64_t[::1] perm = np.ascontiguousarray(perm_in, dtype=np.int64)
    barr = np.asarray(b, dtype=np.float64)
    vector = barr.ndim == 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.ascontiguousarray(
        barr[np.asarray(perm_in)].reshape(lu.shape[0], -1))
    cdef double[:, ::1] y = out
    cdef Py_ssize_t n = lu.shape[0]
    cdef Py_ssize_t m = y.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double d
    for i in range(1, n):
        for j in range(i):
            d = lu[i, j]
            if d != 0.0:
                for c in range(m):
                    y[i, c] -= d * y[j, c]
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            d = lu[i, j]
            if d != 0.0:
                for c in range(m):
                    y[i, c] -= d * y[j, c]
        d = lu[i, i]
        for c in range(m):
            y[i, c] /= d
    return out[:, 0].copy() if vector else out


def lu_inverse(lu, perm):
    return lu_solve(lu, perm, np.eye(np.asarray(lu).shape[0]))


def levinson(r_in, int order):
    cdef const double[::1] r = np.ascontiguousarray(r_in, dtype=np.float64)
    if r[0] <= 0.0:
        raise NumericalError("r[0] must be positive")
    a_arr = np.zeros(order)
    refl_arr = np.zeros(order)
    errs_arr = np.empty(order + 1)
    cdef double[::1] a = a_arr
    cdef double[::1] refl = refl_arr
    cdef double[::1] errs = errs_arr
    cdef double[::1] prev = np.zeros(order)
    cdef double err = r[0]
    cdef double acc, k
    cdef Py_ssize_t m, i
    errs[0] = err
    for m in range(order):
        acc = r[m + 1]
        for i in range(m):
            acc -= a[i] * r[m - i]
        k = acc / err
        if fabs(k) >= 1.0:
            raise NumericalError(
                f"reflection coefficient {k:.6g} at order {m + 1} is not inside (-1, 1)")
        for i in range(m):
            prev[i] = a[i]
        for i in range(m):
            a[i] = prev[i] - k * prev[m - 1 - i]
        a[m] = k
        refl[m] = k
        err *= 1.0 - k * k
        errs[m + 1] = err
    return a_arr, errs_arr, refl_arr


def burg(x_in, int order):
    cdef const double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef double[::1] f = np.array(x, copy=True)
    cdef double[::1] b = np.array(x, copy=True)
    a_arr = np.zeros(order)
    refl_arr = np.zeros(order)
    errs_arr = np.empty(order + 1)
    cdef double[::1] a = a_arr
    cdef double[::1] refl = refl_arr
    cdef double[::1] errs = errs_arr
    cdef double[::1] prev = np.zeros(order)
    cdef double err = 0.0, num, den, k, fv, bv, floor
    cdef Py_ssize_t m, t, i
    for t in range(n):
        err += x[t] * x[t]
    err /= n
    errs[0] = err
    floor = 1e-14 * err
    for m in range(order):
        num = 0.0
        den = 0.0
        for t in range(m + 1, n):
            fv = f[t]
            bv = b[t - 1]
            num += fv * bv
            den += fv * fv + bv * bv
        if den <= 0.0:
            raise NumericalError(f"zero prediction-error power at order {m + 1}")
        k = 2.0 * num / den
        if fabs(k) >= 1.0:
            raise NumericalError(
                f"reflection coefficient {k:.6g} at order {m + 1} is not inside (-1, 1)")
        # descending t keeps b[t - 1] at the previous order when it is read
        for t in range(n - 1, m, -1):
            fv = f[t]
            bv = b[t - 1]
            f[t] = fv - k * bv
            b[t] = bv - k * fv
        for i in range(m):
            prev[i] = a[i]
        for i in range(m):
            a[i] = prev[i] - k * prev[m - 1 - i]
        a[m] = k
        refl[m] = k
        err *= 1.0 - k * k
        errs[m + 1] = err
        if err <= floor:
            raise NumericalError(
                f"prediction-error power vanished at order {m + 1}; input is perfectly predictable")
    return a_arr, errs_arr, refl_arr


def residual_power(x_in, a_in):
    cdef const double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = a.shape[0]
    cdef Py_ssize_t t, i
    cdef double e, acc = 0.0
    for t in range(p, n):
        e = x[t]
        for i in range(p):
            e -= a[i] * x[t - 1 - i]
        acc += e * e
    return acc / (n - p)


def autocorr_matrix(x_in, int order):
    cdef const double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t w = x.shape[0] // order
    out = np.zeros((order, order))
    cdef double[:, ::1] k = out
    cdef Py_ssize_t i, r, c, base
    cdef double v
    for i in range(w):
        base = i * order
        for r in range(order):
            v = x[base + r]
            for c in range(r, order):
                k[r, c] += v * x[base + c]
    for r in range(order):
        for c in range(r, order):
            k[r, c] /= w
            k[c, r] = k[r, c]
    return out, w
