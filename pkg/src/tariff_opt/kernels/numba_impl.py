"""Numba implementations of the hot kernels (same algorithms as numpy_impl)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def project_sum_box(z, total, lo, hi):
    n = z.shape[0]
    x = np.empty(n)
    if hi - lo <= 0.0:
        for i in range(n):
            x[i] = lo
        return x, 0.0
    bp = np.empty(2 * n)
    for i in range(n):
        bp[i] = lo - z[i]
        bp[n + i] = hi - z[i]
    bp = np.sort(bp)
    nu = bp[2 * n - 1]
    g_prev = n * lo
    b_prev = bp[0]
    for j in range(2 * n):
        g_j = 0.0
        for i in range(n):
            v = z[i] + bp[j]
            if v < lo:
                v = lo
            elif v > hi:
                v = hi
            g_j += v
        if g_j >= total:
            if j == 0 or g_j == g_prev or bp[j] == b_prev:
                nu = bp[j]
            else:
                slope = (g_j - g_prev) / (bp[j] - b_prev)
                nu = bp[j] - (g_j - total) / slope
            break
        g_prev = g_j
        b_prev = bp[j]
    for i in range(n):
        v = z[i] + nu
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        x[i] = v
    return x, nu


@njit(cache=True)
def mean_shift_modes_1d(values, bandwidth, tol, max_iter):
    n = values.shape[0]
    cs = np.empty(n + 1)
    cs[0] = 0.0
    for i in range(n):
        cs[i + 1] = cs[i] + values[i]
    modes = np.empty(n)
    for i in range(n):
        m = values[i]
        for _ in range(max_iter):
            a = np.searchsorted(values, m - bandwidth, side="left")
            b = np.searchsorted(values, m + bandwidth, side="right")
            m_new = (cs[b] - cs[a]) / (b - a)
            if abs(m_new - m) <= tol:
                m = m_new
                break
            m = m_new
        modes[i] = m
    return modes


@njit(cache=True)
def pairwise_sq_dists(a, b):
    m, k = a.shape
    c = b.shape[0]
    out = np.empty((m, c))
    for i in range(m):
        for j in range(c):
            s = 0.0
            for t in range(k):
                diff = a[i, t] - b[j, t]
                s += diff * diff
            out[i, j] = s
    return out


@njit(cache=True)
def simulate_demand(seed_block, exog, coef_lag48, coef_lag336, coef_roll, noise):
    n = exog.shape[0]
    L = seed_block.shape[0]
    d = np.empty(n)
    for i in range(L):
        d[i] = seed_block[i]
    rs = 0.0
    for i in range(L - 95, L - 47):
        rs += d[i]
    for t in range(L, n):
        d[t] = (
            exog[t]
            + coef_lag48 * d[t - 48]
            + coef_lag336 * d[t - 336]
            + coef_roll * (rs / 48.0)
            + noise[t]
        )
        rs += d[t - 47] - d[t - 95]
    return d
