"""Pure-Python/numpy fallbacks for the compiled kernels.

Kept in lockstep with _speedups.pyx: both backends must produce
identical alignment ops and numerically equivalent resampler output.
"""

import numpy as np

MATCH, SUB, DEL, INS = 0, 1, 2, 3


def align_ops(ref_ids: np.ndarray, hyp_ids: np.ndarray) -> np.ndarray:
    """Minimum-edit-distance alignment between two int sequences.

    Returns an (n_ops, 3) int32 array of (kind, ref_index, hyp_index)
    rows in reference order; -1 marks an absent index. Backtrace ties
    break as match > substitution > deletion > insertion.
    """
    ref = np.asarray(ref_ids, dtype=np.int32)
    hyp = np.asarray(hyp_ids, dtype=np.int32)
    n, m = len(ref), len(hyp)

    dp = np.empty((n + 1, m + 1), dtype=np.int32)
    dp[0] = np.arange(m + 1, dtype=np.int32)
    cols = np.arange(m, dtype=np.int32)
    for i in range(1, n + 1):
        prev = dp[i - 1]
        # candidate without the horizontal (insertion) dependency
        a = np.minimum(prev[:-1] + (ref[i - 1] != hyp), prev[1:] + 1)
        a = np.concatenate(([np.int32(i)], a))
        # resolve dp[i,j] = min_{k<=j} a[k] + (j-k) via a running minimum
        offs = np.arange(m + 1, dtype=np.int32)
        dp[i] = np.minimum.accumulate(a - offs) + offs

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dp[i, j] == dp[i - 1, j - 1]:
            ops.append((MATCH, i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + 1:
            ops.append((SUB, i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
            ops.append((DEL, i - 1, -1))
            i -= 1
        else:
            ops.append((INS, -1, j - 1))
            j -= 1
    ops.reverse()
    return np.array(ops, dtype=np.int32).reshape(-1, 3)


def upsample2(x: np.ndarray, odd_taps: np.ndarray) -> np.ndarray:
    """Factor-2 upsampling: even outputs copy the input, odd outputs come
    from the 48-tap half-sample interpolator `odd_taps` (zero-padded at
    the edges). Output length is exactly 2 * len(x)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(odd_taps, dtype=np.float64)
    n = len(x)
    half = len(g) // 2  # taps cover x[i-half+1 .. i+half]
    y = np.empty(2 * n, dtype=np.float64)
    y[0::2] = x
    xp = np.concatenate((np.zeros(half - 1), x, np.zeros(half)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, len(g))[:n]
    y[1::2] = windows @ g
    return y
