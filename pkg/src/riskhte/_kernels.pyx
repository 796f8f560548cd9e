# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Semantics match ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef Py_ssize_t _lower_bound(const double[::1] xs, double x0, bint strict) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = xs.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if xs[mid] < x0 or (not strict and xs[mid] == x0):
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef Py_ssize_t _window_start(const double[::1] xs, double x0, Py_ssize_t q) noexcept nogil:
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i = _lower_bound(xs, x0, True)
    cdef Py_ssize_t lo = i - q if i > q else 0
    cdef Py_ssize_t hi = i if i < n - q else n - q
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x0 - xs[mid] <= xs[mid + q] - x0:
            hi = mid
        else:
            lo = mid + 1
    return lo


def loess_local_linear(xs_in, ys_in, x_eval_in, q_in):
    cdef const double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef const double[::1] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef const double[::1] xe = np.ascontiguousarray(x_eval_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t q = min(max(<Py_ssize_t>q_in, 1), n)
    out_arr = np.empty(xe.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, j, lo, a, b
    cdef double x0, h, dx, u, w, s0, s1, s2, t0, t1, det, acc
    with nogil:
        for e in range(xe.shape[0]):
            x0 = xe[e]
            lo = _window_start(xs, x0, q)
            h = x0 - xs[lo]
            if xs[lo + q - 1] - x0 > h:
                h = xs[lo + q - 1] - x0
            if h <= 0.0:
                a = _lower_bound(xs, x0, True)
                b = _lower_bound(xs, x0, False)
                acc = 0.0
                for j in range(a, b):
                    acc = acc + ys[j]
                out[e] = acc / (b - a)
                continue
            s0 = 0.0; s1 = 0.0; s2 = 0.0; t0 = 0.0; t1 = 0.0
            for j in range(lo, lo + q):
                dx = xs[j] - x0
                u = fabs(dx) / h
                if u >= 1.0:
                    continue
                w = 1.0 - u * u * u
                w = w * w * w
                s0 += w
                s1 += w * dx
                s2 += w * dx * dx
                t0 += w * ys[j]
                t1 += w * dx * ys[j]
            det = s0 * s2 - s1 * s1
            if s2 <= 0.0 or det <= 1e-12 * s0 * s2:
                out[e] = t0 / s0
            else:
                out[e] = (s2 * t0 - s1 * t1) / det
    return out_arr


def count_less_equal(ref_in, values_in):
    cdef const double[::1] ref = np.ascontiguousarray(ref_in, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(values_in, dtype=np.float64)
    less_arr = np.empty(v.shape[0], dtype=np.int64)
    eq_arr = np.empty(v.shape[0], dtype=np.int64)
    cdef cnp.int64_t[::1] less = less_arr
    cdef cnp.int64_t[::1] eq = eq_arr
    cdef Py_ssize_t i, a
    with nogil:
        for i in range(v.shape[0]):
            a = _lower_bound(ref, v[i], True)
            less[i] = a
            eq[i] = _lower_bound(ref, v[i], False) - a
    return less_arr, eq_arr
