# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels: 1-D convolution, segment softmax/sum,
row scatter-add, and the cyclic Jacobi eigensolver.

Contracts mirror ``_fallback`` exactly; see that module for docstrings.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt

cnp.import_array()

ctypedef fused real:
    float
    double


def conv1d_forward(real[:, ::1] x, real[:, :, ::1] w, bias, Py_ssize_t padding):
    cdef Py_ssize_t c_in = x.shape[0]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t l_pad = length + 2 * padding
    cdef Py_ssize_t l_out = l_pad - k + 1
    dtype = np.float32 if real is float else np.float64
    xp_arr = np.zeros((c_in, l_pad), dtype=dtype)
    xp_arr[:, padding:padding + length] = np.asarray(x)
    y_arr = np.zeros((c_out, l_out), dtype=dtype)
    cdef real[:, ::1] xp = xp_arr
    cdef real[:, ::1] y = y_arr
    cdef real[::1] b
    cdef Py_ssize_t co, ci, j, t
    cdef real wv
    for co in range(c_out):
        for ci in range(c_in):
            for j in range(k):
                wv = w[co, ci, j]
                for t in range(l_out):
                    y[co, t] += wv * xp[ci, t + j]
    if bias is not None:
        b = bias
        for co in range(c_out):
            wv = b[co]
            for t in range(l_out):
                y[co, t] += wv
    return y_arr


def conv1d_backward(real[:, ::1] x, real[:, :, ::1] w, Py_ssize_t padding,
                    real[:, ::1] gy):
    cdef Py_ssize_t c_in = x.shape[0]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t l_pad = length + 2 * padding
    cdef Py_ssize_t l_out = gy.shape[1]
    dtype = np.float32 if real is float else np.float64
    xp_arr = np.zeros((c_in, l_pad), dtype=dtype)
    xp_arr[:, padding:padding + length] = np.asarray(x)
    gxp_arr = np.zeros((c_in, l_pad), dtype=dtype)
    gw_arr = np.zeros((c_out, c_in, k), dtype=dtype)
    gb_arr = np.zeros(c_out, dtype=dtype)
    cdef real[:, ::1] xp = xp_arr
    cdef real[:, ::1] gxp = gxp_arr
    cdef real[:, :, ::1] gw = gw_arr
    cdef real[::1] gb = gb_arr
    cdef Py_ssize_t co, ci, j, t
    cdef real wv, acc, g
    for co in range(c_out):
        acc = 0.0
        for t in range(l_out):
            acc += gy[co, t]
        gb[co] = acc
        for ci in range(c_in):
            for j in range(k):
                wv = w[co, ci, j]
                acc = 0.0
                for t in range(l_out):
                    g = gy[co, t]
                    acc += g * xp[ci, t + j]
                    gxp[ci, t + j] += g * wv
                gw[co, ci, j] = acc
    gx_arr = np.ascontiguousarray(gxp_arr[:, padding:padding + length])
    return gx_arr, gw_arr, gb_arr


def segment_sum(real[:, ::1] values, long long[::1] seg_ptr):
    cdef Py_ssize_t n = seg_ptr.shape[0] - 1
    cdef Py_ssize_t d = values.shape[1]
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((n, d), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    cdef Py_ssize_t s, r, c
    for s in range(n):
        for r in range(seg_ptr[s], seg_ptr[s + 1]):
            for c in range(d):
                out[s, c] += values[r, c]
    return out_arr


def segment_softmax(real[::1] scores, long long[::1] seg_ptr):
    cdef Py_ssize_t n = seg_ptr.shape[0] - 1
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros(scores.shape[0], dtype=dtype)
    cdef real[::1] out = out_arr
    cdef Py_ssize_t s, r
    cdef double mx, total
    for s in range(n):
        if seg_ptr[s] == seg_ptr[s + 1]:
            continue
        mx = scores[seg_ptr[s]]
        for r in range(seg_ptr[s] + 1, seg_ptr[s + 1]):
            if scores[r] > mx:
                mx = scores[r]
        total = 0.0
        for r in range(seg_ptr[s], seg_ptr[s + 1]):
            out[r] = <real> exp(scores[r] - mx)
            total += out[r]
        for r in range(seg_ptr[s], seg_ptr[s + 1]):
            out[r] = <real> (out[r] / total)
    return out_arr


def scatter_add_rows(real[:, ::1] acc, long long[::1] idx, real[:, ::1] rows):
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t d = rows.shape[1]
    cdef Py_ssize_t i, c, target
    for i in range(m):
        target = idx[i]
        for c in range(d):
            acc[target, c] += rows[i, c]
    return np.asarray(acc)


def jacobi_sweeps(a_in, double tol=1e-12, Py_ssize_t max_sweeps=100):
    a_arr = np.array(a_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = a_arr.shape[0]
    v_arr = np.eye(n, dtype=np.float64)
    if n < 2:
        return np.diagonal(a_arr).copy(), v_arr, 0, True
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t sweeps = 0, p, q, i
    cdef double off, apq, tau, t, c, s, aip, aiq
    cdef bint converged = False
    while sweeps < max_sweeps:
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off <= tol:
            converged = True
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) < 1e-30:
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(n):
                    aip = a[p, i]
                    aiq = a[q, i]
                    a[p, i] = c * aip - s * aiq
                    a[q, i] = s * aip + c * aiq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    aip = v[i, p]
                    aiq = v[i, q]
                    v[i, p] = c * aip - s * aiq
                    v[i, q] = s * aip + c * aiq
    else:
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        converged = off <= tol
    return np.diagonal(a_arr).copy(), v_arr, sweeps, converged
