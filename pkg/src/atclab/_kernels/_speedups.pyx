# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: alignment DP and the factor-2 upsampler.

Mirror of atclab._kernels.pure; both must return identical alignment
ops and equivalent resampler output.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF OP_MATCH = 0
DEF OP_SUB = 1
DEF OP_DEL = 2
DEF OP_INS = 3


def align_ops(ref_ids, hyp_ids):
    """Minimum-edit-distance alignment, (n_ops, 3) int32 rows of
    (kind, ref_index, hyp_index); ties break match > sub > del > ins."""
    cdef cnp.int32_t[::1] ref = np.ascontiguousarray(ref_ids, dtype=np.int32)
    cdef cnp.int32_t[::1] hyp = np.ascontiguousarray(hyp_ids, dtype=np.int32)
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t m = hyp.shape[0]

    cdef cnp.ndarray dp_arr = np.empty((n + 1, m + 1), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] dp = dp_arr
    cdef Py_ssize_t i, j
    cdef cnp.int32_t best, cand

    for j in range(m + 1):
        dp[0, j] = <cnp.int32_t> j
    for i in range(1, n + 1):
        dp[i, 0] = <cnp.int32_t> i
        for j in range(1, m + 1):
            best = dp[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            cand = dp[i - 1, j] + 1
            if cand < best:
                best = cand
            cand = dp[i, j - 1] + 1
            if cand < best:
                best = cand
            dp[i, j] = best

    cdef cnp.ndarray ops_arr = np.empty((n + m, 3), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] ops = ops_arr
    cdef Py_ssize_t k = n + m
    i = n
    j = m
    while i > 0 or j > 0:
        k -= 1
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dp[i, j] == dp[i - 1, j - 1]:
            ops[k, 0] = OP_MATCH
            ops[k, 1] = <cnp.int32_t> (i - 1)
            ops[k, 2] = <cnp.int32_t> (j - 1)
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + 1:
            ops[k, 0] = OP_SUB
            ops[k, 1] = <cnp.int32_t> (i - 1)
            ops[k, 2] = <cnp.int32_t> (j - 1)
            i -= 1
            j -= 1
        elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
            ops[k, 0] = OP_DEL
            ops[k, 1] = <cnp.int32_t> (i - 1)
            ops[k, 2] = -1
            i -= 1
        else:
            ops[k, 0] = OP_INS
            ops[k, 1] = -1
            ops[k, 2] = <cnp.int32_t> (j - 1)
            j -= 1
    return ops_arr[k:].copy()


def upsample2(x, odd_taps):
    """Factor-2 upsampling: even outputs copy the input, odd outputs come
    from the half-sample interpolator taps (zero-padded at the edges)."""
    cdef cnp.float64_t[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.float64_t[::1] g = np.ascontiguousarray(odd_taps, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t t = g.shape[0]
    cdef Py_ssize_t half = t // 2
    cdef cnp.ndarray y_arr = np.empty(2 * n, dtype=np.float64)
    cdef cnp.float64_t[::1] y = y_arr
    cdef Py_ssize_t i, k, src
    cdef double acc

    for i in range(n):
        y[2 * i] = xv[i]
        acc = 0.0
        for k in range(t):
            src = i - half + 1 + k
            if 0 <= src < n:
                acc += g[k] * xv[src]
        y[2 * i + 1] = acc
    return y_arr
