"""Pure-numpy implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable; the
compiled module in ``_core.pyx`` implements the same contracts with plain
C loops.  Both backends are deterministic; they agree to rounding because
they may differ in accumulation order.
"""

import numpy as np


def conv1d_forward(x, w, bias, padding):
    """Correlate ``x`` [C_in, L] with ``w`` [C_out, C_in, k], stride 1.

    Output length is L + 2*padding - k + 1.
    """
    c_in, length = x.shape
    c_out, _, k = w.shape
    xp = np.zeros((c_in, length + 2 * padding), dtype=x.dtype)
    xp[:, padding:padding + length] = x
    l_out = length + 2 * padding - k + 1
    s0, s1 = xp.strides
    cols = np.lib.stride_tricks.as_strided(xp, (c_in, k, l_out), (s0, s1, s1))
    y = w.reshape(c_out, c_in * k) @ cols.reshape(c_in * k, l_out)
    if bias is not None:
        y += bias[:, None]
    return y


def conv1d_backward(x, w, padding, gy):
    """Gradients of conv1d_forward w.r.t. input, weights, and bias."""
    c_in, length = x.shape
    c_out, _, k = w.shape
    l_out = gy.shape[1]
    xp = np.zeros((c_in, length + 2 * padding), dtype=x.dtype)
    xp[:, padding:padding + length] = x
    s0, s1 = xp.strides
    cols = np.lib.stride_tricks.as_strided(xp, (c_in, k, l_out), (s0, s1, s1))
    gw = (gy @ cols.reshape(c_in * k, l_out).T).reshape(c_out, c_in, k)
    gb = gy.sum(axis=1)
    gcols = (w.reshape(c_out, c_in * k).T @ gy).reshape(c_in, k, l_out)
    gxp = np.zeros_like(xp)
    for j in range(k):
        gxp[:, j:j + l_out] += gcols[:, j, :]
    gx = gxp[:, padding:padding + length]
    return np.ascontiguousarray(gx), gw, gb


def segment_sum(values, seg_ptr):
    """Sum rows of ``values`` [m, d] into segments delimited by ``seg_ptr``.

    Rows must already be grouped so that segment ``s`` occupies rows
    seg_ptr[s]:seg_ptr[s+1].  Empty segments yield zero rows.
    """
    n = seg_ptr.shape[0] - 1
    out = np.zeros((n, values.shape[1]), dtype=values.dtype)
    counts = np.diff(seg_ptr)
    nonempty = np.flatnonzero(counts > 0)
    if nonempty.size:
        starts = seg_ptr[:-1][nonempty]
        out[nonempty] = np.add.reduceat(values, starts, axis=0)
    return out


def segment_softmax(scores, seg_ptr):
    """Softmax of ``scores`` [m] within each seg_ptr segment, max-stabilized."""
    out = np.zeros_like(scores)
    counts = np.diff(seg_ptr)
    nonempty = np.flatnonzero(counts > 0)
    if nonempty.size == 0:
        return out
    starts = seg_ptr[:-1][nonempty]
    live = counts[nonempty]
    seg_max = np.maximum.reduceat(scores, starts)
    shifted = np.exp(scores - np.repeat(seg_max, live))
    seg_total = np.add.reduceat(shifted, starts)
    out[:] = shifted / np.repeat(seg_total, live)
    return out


def scatter_add_rows(acc, idx, rows):
    """In place: acc[idx[i]] += rows[i] for every i, duplicates accumulated."""
    np.add.at(acc, idx, rows)
    return acc


def jacobi_sweeps(a, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi diagonalization of a symmetric matrix (float64).

    Returns (eigenvalues_unsorted, eigenvectors_as_columns, sweeps, converged).
    Sweep order is row-major over the strict upper triangle, which makes the
    result deterministic for identical input.
    """
    a = np.array(a, dtype=np.float64, order="C")
    n = a.shape[0]
    v = np.eye(n, dtype=np.float64)
    if n < 2:
        return np.diagonal(a).copy(), v, 0, True
    sweeps = 0
    while sweeps < max_sweeps:
        off = np.abs(np.triu(a, 1)).max()
        if off <= tol:
            return np.diagonal(a).copy(), v, sweeps, True
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-30:
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # Two-sided rotation: columns first, then rows (A <- J^T A J).
                aip = a[:, p].copy()
                aiq = a[:, q].copy()
                a[:, p] = c * aip - s * aiq
                a[:, q] = s * aip + c * aiq
                api = a[p, :].copy()
                aqi = a[q, :].copy()
                a[p, :] = c * api - s * aqi
                a[q, :] = s * api + c * aqi
                a[p, q] = 0.0
                a[q, p] = 0.0
                vip = v[:, p].copy()
                viq = v[:, q].copy()
                v[:, p] = c * vip - s * viq
                v[:, q] = s * vip + c * viq
    converged = np.abs(np.triu(a, 1)).max() <= tol
    return np.diagonal(a).copy(), v, sweeps, converged
