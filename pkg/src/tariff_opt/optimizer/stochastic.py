"""Risk-averse stochastic solves and the CVaR helpers.

The stochastic program maximizes

    (1 - chi) * sum_w pi_w profit_w(x) + chi * (eta - kappa * sum_w pi_w s_w)

over the first stage x = (tariff, pB, pC) and the CVaR auxiliaries
(eta, s >= 0, s_w >= eta - profit_w), kappa = 1/(1 - alpha).  After
eliminating the second stage the profits are concave quadratics with
diagonal curvature, so the whole thing maps onto the interior-point solver
in :mod:`.ipm` with one quadratic epigraph constraint per scenario.
"""

from __future__ import annotations

import numpy as np

from ..errors import MaxIterationsError, NonConcaveError, SolutionInvalidError, UnboundedError
from .ipm import solve_qcqp
from .problem import (
    FREE,
    INDEXED,
    P_PER_POUND,
    ProblemSpec,
    TariffSolution,
    _scenario_arrays,
    expand_solution,
    scenario_quadratics,
    validate_solution,
)


def cvar(profits, probs, alpha):
    """CVaR and VaR of a discrete profit distribution.

    Maximizes eta - 1/(1-alpha) * E[max(0, eta - profit)] by scanning the
    candidate etas (the profit values themselves, where the optimum of the
    piecewise-linear objective is attained).  Returns (cvar, var) with the
    lowest maximizing eta reported as the VaR.
    """
    profits = np.asarray(profits, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    kappa = 1.0 / (1.0 - alpha)
    etas = np.unique(profits)
    shortfall = np.maximum(0.0, etas[:, None] - profits[None, :])
    vals = etas - kappa * (shortfall @ probs)
    j = int(np.argmax(vals))
    return float(vals[j]), float(etas[j])


def cvar_via_ipm(profits, probs, alpha, eps_gap=1e-10, eps_feas=1e-10):
    """Solve the Rockafellar CVaR program as an LP with the package solver.

    Exists as the solver-embedded counterpart of :func:`cvar`; the two must
    agree, which the test suite checks by enumeration.
    """
    profits = np.asarray(profits, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n = profits.size
    kappa = 1.0 / (1.0 - alpha)
    # w = [eta, s_1..s_n]
    p0 = np.zeros(n + 1)
    q0 = np.concatenate([[-1.0], kappa * probs])
    lo = np.concatenate([[-np.inf], np.zeros(n)])
    hi = np.full(n + 1, np.inf)
    Qq = np.zeros((n, n + 1))
    Qq[:, 0] = 1.0
    Qq[np.arange(n), 1 + np.arange(n)] = -1.0
    Rq = -profits
    w0 = np.concatenate([[float(np.min(profits)) - 1.0], np.ones(n)])
    res = solve_qcqp(
        p0, q0, lo, hi, None, None, np.zeros((n, n + 1)), Qq, Rq, w0,
        eps_feas=eps_feas, eps_gap=eps_gap, max_iter=300,
    )
    return -res.objective, float(res.w[0])


def solve_stochastic(spec: ProblemSpec, scen_set, eps_feas=1e-9, eps_gap=1e-9, max_iter=200) -> TariffSolution:
    """Solve the risk-averse two-stage problem over a scenario set."""
    pool_p, avail, beta_p, probs = _scenario_arrays(scen_set)
    n_scen, T = pool_p.shape
    if T != spec.horizon:
        raise ValueError(f"scenario horizon {T} does not match spec horizon {spec.horizon}")
    if abs(float(np.sum(probs)) - 1.0) > 1e-9:
        raise ValueError("scenario probabilities must sum to 1")
    if spec.price_regulation == FREE and np.all(beta_p >= 0.0):
        raise UnboundedError("free retail prices with no price-sensitive scenario")
    if np.any(beta_p >= 0.0):
        raise NonConcaveError("every scenario needs a negative price coefficient")

    curv, lin, const = scenario_quadratics(spec, pool_p, avail, beta_p)
    chi = spec.chi
    kappa = 1.0 / (1.0 - spec.alpha)

    # first-stage layout: prices 0..T-1, then pB, pC; fix degenerate coords
    fixed = np.zeros(T + 2, dtype=bool)
    fixed_vals = np.zeros(T + 2)
    if spec.price_regulation == INDEXED:
        band_lo_p, band_hi_p = spec.tariff_band()
        band_lo = band_lo_p / P_PER_POUND
        band_hi = band_hi_p / P_PER_POUND
        if band_hi - band_lo <= 1e-15 * max(1.0, abs(band_hi)):
            fixed[:T] = True
            fixed_vals[:T] = spec.lambda_e_bar / P_PER_POUND
    if spec.pb_max == 0.0:
        fixed[T] = True
    if spec.ppa_max == 0.0:
        fixed[T + 1] = True
    free = np.flatnonzero(~fixed)
    n_x = free.size

    # fold fixed coordinates into the scenario constants
    const_eff = const.copy()
    if np.any(fixed):
        vf = fixed_vals[fixed]
        const_eff += lin[:, fixed] @ vf
        price_fixed = fixed[:T]
        if np.any(price_fixed):
            vp = fixed_vals[:T][price_fixed]
            const_eff += 0.5 * np.sum(curv[:, price_fixed] * vp * vp, axis=1)
    lin_free = lin[:, free]
    price_free = free[free < T]
    curv_free = np.zeros((n_scen, n_x))
    curv_free[:, : price_free.size] = curv[:, price_free]  # price coords come first in `free`

    # starting tariff point
    x0 = np.zeros(n_x)
    mean_curv = probs @ curv
    mean_lin = probs @ lin
    if price_free.size:
        if spec.price_regulation == INDEXED:
            x0[: price_free.size] = spec.lambda_e_bar / P_PER_POUND
        else:
            x0[: price_free.size] = -mean_lin[price_free] / mean_curv[price_free]
    if not fixed[T]:
        x0[np.searchsorted(free, T)] = spec.pb_max / 2.0
    if not fixed[T + 1]:
        x0[np.searchsorted(free, T + 1)] = spec.ppa_max / 2.0

    # box bounds on x
    lo_x = np.full(n_x, -np.inf)
    hi_x = np.full(n_x, np.inf)
    if spec.price_regulation == INDEXED and price_free.size:
        lo_x[: price_free.size] = band_lo
        hi_x[: price_free.size] = band_hi
    if not fixed[T]:
        j = int(np.searchsorted(free, T))
        lo_x[j], hi_x[j] = 0.0, spec.pb_max
    if not fixed[T + 1]:
        j = int(np.searchsorted(free, T + 1))
        lo_x[j], hi_x[j] = 0.0, spec.ppa_max

    # daily-mean equality rows over the free price coords
    rows = []
    rhs = []
    if spec.price_regulation == INDEXED and price_free.size:
        day = spec.day_index()
        lam_bar = spec.lambda_e_bar / P_PER_POUND
        for d in range(len(spec.day_slots)):
            row = np.zeros(n_x)
            row[: price_free.size] = (day[price_free] == d).astype(np.float64)
            rows.append(row)
            rhs.append(spec.day_slots[d] * lam_bar)

    def f_of(xv):
        return 0.5 * np.sum(curv_free * xv[None, :] ** 2, axis=1) + lin_free @ xv + const_eff

    extra_lin = _pool_rows(spec, pool_p, avail, beta_p, free, T) if spec.nonnegative_pool else None
    if extra_lin is not None:
        x0 = _repair_start(x0, free, T, extra_lin[0], extra_lin[1])

    if chi == 0.0:
        N = n_x
        p0 = -(probs @ curv_free)
        q0 = -(probs @ lin_free)
        lo_w, hi_w = lo_x, hi_x
        Pq = np.zeros((0, N))
        Qq = np.zeros((0, N))
        Rq = np.zeros(0)
        w0 = x0.copy()
        A = np.asarray(rows) if rows else None
        b = np.asarray(rhs) if rows else None
    else:
        N = n_x + 1 + n_scen
        p0 = np.zeros(N)
        p0[:n_x] = -(1.0 - chi) * (probs @ curv_free)
        q0 = np.zeros(N)
        q0[:n_x] = -(1.0 - chi) * (probs @ lin_free)
        q0[n_x] = -chi
        q0[n_x + 1 :] = chi * kappa * probs
        lo_w = np.concatenate([lo_x, [-np.inf], np.zeros(n_scen)])
        hi_w = np.concatenate([hi_x, [np.inf], np.full(n_scen, np.inf)])
        Pq = np.zeros((n_scen, N))
        Pq[:, :n_x] = -curv_free
        Qq = np.zeros((n_scen, N))
        Qq[:, :n_x] = -lin_free
        Qq[:, n_x] = 1.0
        Qq[np.arange(n_scen), n_x + 1 + np.arange(n_scen)] = -1.0
        Rq = -const_eff
        f0 = f_of(x0)
        margin = max(1.0, 1e-3 * float(np.max(np.abs(f0))))
        eta0 = float(np.min(f0)) - margin
        w0 = np.concatenate([x0, [eta0], np.full(n_scen, margin)])
        if rows:
            A = np.zeros((len(rows), N))
            A[:, :n_x] = np.asarray(rows)
            b = np.asarray(rhs)
        else:
            A, b = None, None

    if extra_lin is not None:
        Q_extra, R_extra = extra_lin
        pad = np.zeros((Q_extra.shape[0], N - n_x))
        Qq = np.vstack([Qq, np.hstack([Q_extra, pad])])
        Pq = np.vstack([Pq, np.zeros((Q_extra.shape[0], N))])
        Rq = np.concatenate([Rq, R_extra])

    if N == 0:
        return _fixed_solution(spec, scen_set, fixed_vals, T)

    try:
        res = solve_qcqp(p0, q0, lo_w, hi_w, A, b, Pq, Qq, Rq, w0,
                         eps_feas=eps_feas, eps_gap=eps_gap, max_iter=max_iter)
    except MaxIterationsError as exc:
        if exc.best is not None:
            sol = _expand(spec, scen_set, exc.best, free, fixed_vals, n_x, T, chi, validate=False)
            raise MaxIterationsError(exc.iterations, exc.residuals, best=sol) from None
        raise
    return _expand(spec, scen_set, res, free, fixed_vals, n_x, T, chi)


def solve_free_price(spec: ProblemSpec, scen_set, **kwargs) -> TariffSolution:
    """Variant with the pool indexing and tariff band dropped.

    The retail price becomes a scenario-independent per-slot first-stage
    variable; demand, balance, PPA and contract constraints are unchanged.
    """
    from dataclasses import replace

    return solve_stochastic(replace(spec, price_regulation=FREE), scen_set, **kwargs)


def _pool_rows(spec, pool_p, avail, beta_p, free, T):
    """Linear rows forcing pool purchases nonnegative, over free coords."""
    n_scen = pool_p.shape[0]
    dhat = spec.baseline_demand
    beta = beta_p * P_PER_POUND
    if spec.price_regulation == INDEXED:
        delta = (pool_p - spec.lambda_e_bar) / P_PER_POUND
    else:
        delta = np.zeros_like(pool_p)
    n_free = free.size
    price_free = free[free < T]
    rows = np.zeros((n_scen * T, n_free))
    consts = np.zeros(n_scen * T)
    pb_col = np.searchsorted(free, T) if T in free else -1
    pc_col = np.searchsorted(free, T + 1) if (T + 1) in free else -1
    k = 0
    price_pos = {int(t): i for i, t in enumerate(price_free)}
    for w in range(n_scen):
        for t in range(T):
            if t in price_pos:
                rows[k, price_pos[t]] = -beta[w]
            if pb_col >= 0:
                rows[k, pb_col] = 1.0
            if pc_col >= 0:
                rows[k, pc_col] = avail[w, t]
            consts[k] = -(beta[w] * delta[w, t] + dhat[t])
            k += 1
    return rows, consts


def _repair_start(x0, free, T, Q_extra, R_extra):
    """Shrink the contract start values until the pool rows are strictly slack."""
    x = x0.copy()
    for _ in range(8):
        if np.max(Q_extra @ x + R_extra) < 0.0:
            return x
        for t in (T, T + 1):
            if t in free:
                x[int(np.searchsorted(free, t))] *= 0.1
    return x


def _fixed_solution(spec, scen_set, fixed_vals, T):
    price_p = fixed_vals[:T] * P_PER_POUND
    sol = expand_solution(spec, scen_set, price_p, fixed_vals[T], fixed_vals[T + 1],
                          solver={"method": "fixed", "iterations": 0})
    return sol


def _expand(spec, scen_set, res, free, fixed_vals, n_x, T, chi, validate=True):
    x_full = fixed_vals.copy()
    x_full[free] = res.w[:n_x]
    price_vec_p = x_full[:T] * P_PER_POUND
    pb = float(x_full[T])
    pc = float(x_full[T + 1])
    if chi > 0.0:
        eta = float(res.w[n_x])
        s = np.array(res.w[n_x + 1 :], dtype=np.float64)
    else:
        eta, s = None, None
    solver = {
        "method": "interior-point",
        "iterations": res.iterations,
        "residuals": res.residuals,
    }
    sol = expand_solution(spec, scen_set, price_vec_p, pb, pc, eta=eta, s=s, solver=solver)
    if validate:
        violations = validate_solution(sol, spec, scen_set, feas_tol=1e-7)
        if violations:
            raise SolutionInvalidError(violations)
    return sol
