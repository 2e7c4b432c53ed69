"""Pure-numpy implementations of the hot kernels."""

from __future__ import annotations

import numpy as np


def project_sum_box(z: np.ndarray, total: float, lo: float, hi: float):
    """Euclidean projection of ``z`` onto {x : sum(x) = total, lo <= x <= hi}.

    The projection is clip(z + nu, lo, hi) for the unique shift nu at which
    the clipped sum hits ``total``; nu is located exactly by scanning the
    breakpoints of the piecewise-linear clipped sum.  Returns (x, nu); nu is
    the dual variable of the sum constraint.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    if hi - lo <= 0.0:
        return np.full(n, lo), 0.0
    bp = np.sort(np.concatenate([lo - z, hi - z]))
    g = np.clip(z[None, :] + bp[:, None], lo, hi).sum(axis=1)
    j = int(np.searchsorted(g, total, side="left"))
    if j <= 0:
        nu = bp[0]
    elif j >= 2 * n:
        nu = bp[-1]
    elif g[j] == g[j - 1] or bp[j] == bp[j - 1]:
        nu = bp[j]
    else:
        slope = (g[j] - g[j - 1]) / (bp[j] - bp[j - 1])
        nu = bp[j] - (g[j] - total) / slope
    return np.clip(z + nu, lo, hi), float(nu)


def mean_shift_modes_1d(values: np.ndarray, bandwidth: float, tol: float, max_iter: int):
    """Flat-kernel mean shift on sorted 1-D data, seeded at every point.

    Returns the converged position for each input point.  ``values`` must be
    sorted ascending; the window is the closed interval [m - h, m + h].
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    cs = np.concatenate([[0.0], np.cumsum(values)])
    modes = np.empty(n)
    for i in range(n):
        m = values[i]
        for _ in range(max_iter):
            a = int(np.searchsorted(values, m - bandwidth, side="left"))
            b = int(np.searchsorted(values, m + bandwidth, side="right"))
            m_new = (cs[b] - cs[a]) / (b - a)
            if abs(m_new - m) <= tol:
                m = m_new
                break
            m = m_new
        modes[i] = m
    return modes


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray):
    """Squared Euclidean distances between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, k = a.shape
    c = b.shape[0]
    out = np.empty((m, c))
    chunk = max(1, (1 << 22) // max(1, c * k))
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        diff = a[start:stop, None, :] - b[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def simulate_demand(
    seed_block: np.ndarray,
    exog: np.ndarray,
    coef_lag48: float,
    coef_lag336: float,
    coef_roll: float,
    noise: np.ndarray,
):
    """Sequential demand recursion used by the synthetic data generator.

    d[t] = exog[t] + c48*d[t-48] + c336*d[t-336] + c_roll*mean(d[t-95..t-48])
           + noise[t]
    with the first len(seed_block) slots pinned to ``seed_block``.
    """
    n = exog.size
    L = seed_block.size
    d = np.empty(n)
    d[:L] = seed_block
    # running sum of the 48-slot window ending at lag 48
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
