"""Single-scenario solver.

With one scenario and no risk term the problem decomposes: the two contract
volumes enter the profit linearly (bang-bang against their break-even
prices), and the tariff's variable part solves, day by day, a Euclidean
projection of the per-slot unconstrained optimum onto the daily-mean /
band constraint set.  Everything is closed form, which is what makes the
scenario-reduction step (one deterministic solve per raw scenario) cheap.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import NonConcaveError
from .problem import (
    INDEXED,
    P_PER_POUND,
    ProblemSpec,
    TariffSolution,
    _scenario_arrays,
    expand_solution,
)


def solve_deterministic(spec: ProblemSpec, scenario) -> TariffSolution:
    """Globally maximize profit for one scenario (risk weight irrelevant)."""
    pool_p, avail, beta_p, _ = _scenario_arrays(scenario)
    if pool_p.shape[0] != 1:
        raise ValueError("solve_deterministic expects a single scenario")
    if beta_p[0] >= 0.0:
        raise NonConcaveError(f"price coefficient must be negative, got {beta_p[0]}")
    if spec.nonnegative_pool:
        # pool-nonnegativity couples slots; defer to the general solver
        from .stochastic import solve_stochastic

        return solve_stochastic(spec.with_chi(0.0), _SingleSet(pool_p, avail, beta_p))

    pool = pool_p[0] / P_PER_POUND
    beta = beta_p[0] * P_PER_POUND
    dhat = spec.baseline_demand
    T = spec.horizon

    # per-slot unconstrained optimum of (retail - pool) * demand
    retail_apex = (beta * pool - dhat) / (2.0 * beta)

    if spec.price_regulation == INDEXED:
        lo, hi = spec.tariff_band()
        lo /= P_PER_POUND
        hi /= P_PER_POUND
        lam_bar = spec.lambda_e_bar / P_PER_POUND
        target = retail_apex - (pool - lam_bar)
        lam_e = np.empty(T)
        stationarity = 0.0
        pos = 0
        for n_d in spec.day_slots:
            z = np.ascontiguousarray(target[pos : pos + n_d])
            x, nu = kernels.project_sum_box(z, n_d * lam_bar, lo, hi)
            lam_e[pos : pos + n_d] = x
            stationarity = max(stationarity, _projection_kkt(z, x, nu, lo, hi, beta))
            pos += n_d
        price_vec_p = lam_e * P_PER_POUND
    else:
        price_vec_p = retail_apex * P_PER_POUND
        stationarity = 0.0

    pb_coef = float(np.sum(pool - spec.pb_price / P_PER_POUND))
    pb = spec.pb_max if pb_coef > 0.0 else 0.0
    ppa_coef = float(np.sum(avail[0] * (pool - spec.ppa_price / P_PER_POUND)))
    pc = spec.ppa_max if ppa_coef > 0.0 else 0.0

    solver = {
        "method": "analytic",
        "iterations": 0,
        "residuals": {"kkt_stationarity": stationarity, "r_pri": 0.0},
        "pb_margin_gbp": pb_coef,
        "ppa_margin_gbp": ppa_coef,
    }
    return expand_solution(spec, _SingleSet(pool_p, avail, beta_p), price_vec_p, pb, pc, solver=solver)


def _projection_kkt(z, x, nu, lo, hi, beta):
    """Max stationarity residual of the per-day projection, in pounds.

    Duals are reconstructed from the clipping pattern; for an exact
    projection the residual is at roundoff level.
    """
    two_b = 2.0 * abs(beta)
    nu_day = -two_b * nu
    grad = two_b * (x - z) + nu_day
    mu_lo = np.where(x <= lo, np.maximum(grad, 0.0), 0.0)
    mu_hi = np.where(x >= hi, np.maximum(-grad, 0.0), 0.0)
    return float(np.max(np.abs(grad - mu_lo + mu_hi)))


class _SingleSet:
    """Minimal scenario-set view over one scenario."""

    def __init__(self, pool, availability, beta):
        self.pool = pool
        self.availability = availability
        self.beta = beta
        self.probabilities = np.ones(1)
