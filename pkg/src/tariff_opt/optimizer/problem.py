"""Problem data, solution container, profit algebra and the solution validator.

Conventions used throughout the optimizer:

* user-facing prices are in p/kWh, energies in kWh per half-hour slot;
* all monetary arithmetic inside the solvers is done in pounds (p/100) so
  KKT residuals stay well scaled; reported prices are converted back;
* the demand slope ``beta`` is in kWh per (p/kWh): demand = beta * retail
  price (p/kWh) + baseline.

Scenario inputs are duck-typed.  A single scenario needs ``pool`` (T,),
``availability`` (T,), ``beta`` and ``probability``; a scenario set needs
``pool`` (n, T), ``availability`` (n, T), ``beta`` (n,) and
``probabilities`` (n,).
"""

from __future__ import annotations

import datetime as _dt
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import InfeasibleError, InvalidConfigError

P_PER_POUND = 100.0

INDEXED = "indexed"
FREE = "free"


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of the retailer problem over a fixed horizon.

    ``day_slots`` partitions the horizon into days; the daily-mean tariff
    constraint applies per day.  Standard horizons use 48 slots per day.
    """

    lambda_e_bar: float          # p/kWh, prescribed mean of the tariff's variable part
    gamma: float                 # half-width of the tariff band, relative
    pb_price: float              # p/kWh, forward base contract price
    pb_max: float                # kWh per slot
    ppa_price: float             # p/kWh, PPA contract price
    ppa_max: float               # kWh per slot
    alpha: float                 # CVaR tail level: averages the worst (1 - alpha) mass
    chi: float                   # risk weight between expected profit and CVaR
    baseline_demand: np.ndarray  # kWh per slot, length T
    day_slots: tuple             # slots per day, sums to T
    price_regulation: str = INDEXED
    start_date: _dt.date | None = None
    nonnegative_pool: bool = False  # optional flag forcing pool purchases >= 0

    def __post_init__(self):
        base = np.ascontiguousarray(np.asarray(self.baseline_demand, dtype=np.float64))
        object.__setattr__(self, "baseline_demand", base)
        object.__setattr__(self, "day_slots", tuple(int(d) for d in self.day_slots))
        if not 0.0 <= self.chi <= 1.0:
            raise InvalidConfigError(f"chi must be in [0, 1], got {self.chi}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.gamma < 0.0:
            raise InvalidConfigError(f"gamma must be nonnegative, got {self.gamma}")
        if min(self.pb_max, self.ppa_max) < 0.0 or min(self.pb_price, self.ppa_price) < 0.0:
            raise InvalidConfigError("contract prices and bounds must be nonnegative")
        if any(d <= 0 for d in self.day_slots):
            raise InvalidConfigError("day_slots entries must be positive")
        if sum(self.day_slots) != base.size:
            raise InvalidConfigError(
                f"day_slots sums to {sum(self.day_slots)} but baseline has {base.size} slots"
            )
        if self.price_regulation not in (INDEXED, FREE):
            raise InvalidConfigError(f"unknown price regulation {self.price_regulation!r}")

    @property
    def horizon(self) -> int:
        return self.baseline_demand.size

    def tariff_band(self):
        """Return the (lo, hi) band for the variable tariff part, in p/kWh."""
        lo = (1.0 - self.gamma) * self.lambda_e_bar
        hi = (1.0 + self.gamma) * self.lambda_e_bar
        if lo > hi:
            raise InfeasibleError(
                f"empty tariff band: gamma={self.gamma}, lambda_e_bar={self.lambda_e_bar}"
            )
        return lo, hi

    def day_index(self) -> np.ndarray:
        """Day id per slot."""
        idx = np.empty(self.horizon, dtype=np.int64)
        pos = 0
        for d, n in enumerate(self.day_slots):
            idx[pos : pos + n] = d
            pos += n
        return idx

    def with_chi(self, chi: float) -> "ProblemSpec":
        return replace(self, chi=float(chi))

    def with_contract_prices(self, pb_price=None, ppa_price=None) -> "ProblemSpec":
        return replace(
            self,
            pb_price=self.pb_price if pb_price is None else float(pb_price),
            ppa_price=self.ppa_price if ppa_price is None else float(ppa_price),
        )


@dataclass(frozen=True)
class FirstStage:
    """A first-stage decision point.

    Exactly one of ``lambda_e`` (indexed regulation) or ``retail`` (free
    prices) is set; both are per-slot vectors in p/kWh.
    """

    pb: float
    ppa_contract: float
    lambda_e: np.ndarray | None = None
    retail: np.ndarray | None = None


@dataclass
class TariffSolution:
    """First-stage decisions plus the implied per-scenario second stage."""

    price_regulation: str
    lambda_e: np.ndarray | None    # p/kWh per slot (indexed mode only)
    retail_price: np.ndarray       # p/kWh, (n_scen, T)
    pb: float                      # kWh per slot from the forward contract
    ppa_contract: float            # kWh per slot contracted under the PPA
    demand: np.ndarray             # kWh, (n_scen, T)
    pool_purchase: np.ndarray      # kWh, (n_scen, T); may be negative (sell-back)
    ppa_delivered: np.ndarray      # kWh, (n_scen, T)
    profits: np.ndarray            # pounds per scenario
    probabilities: np.ndarray
    expected_profit: float         # pounds
    eta: float                     # pounds; equals the VaR at the optimum
    s: np.ndarray                  # pounds, CVaR shortfall auxiliaries
    cvar: float                    # pounds
    objective: float               # pounds, (1-chi) * expected + chi * cvar
    chi: float
    alpha: float
    solver: dict = field(default_factory=dict)

    @property
    def n_scenarios(self) -> int:
        return self.profits.size


def _scenario_arrays(scen):
    """Normalize a scenario or scenario set to 2-D arrays."""
    if hasattr(scen, "probabilities"):
        pool = np.asarray(scen.pool, dtype=np.float64)
        avail = np.asarray(scen.availability, dtype=np.float64)
        beta = np.asarray(scen.beta, dtype=np.float64)
        probs = np.asarray(scen.probabilities, dtype=np.float64)
        return np.atleast_2d(pool), np.atleast_2d(avail), np.atleast_1d(beta), probs
    pool = np.atleast_2d(np.asarray(scen.pool, dtype=np.float64))
    avail = np.atleast_2d(np.asarray(scen.availability, dtype=np.float64))
    beta = np.atleast_1d(np.asarray(scen.beta, dtype=np.float64))
    probs = np.atleast_1d(np.asarray(getattr(scen, "probability", 1.0), dtype=np.float64))
    return pool, avail, beta, probs


def scenario_quadratics(spec: ProblemSpec, pool_p: np.ndarray, avail: np.ndarray, beta_p: np.ndarray):
    """Per-scenario profit as a quadratic in the first-stage vector.

    The first stage is x = [price variables (T), pB, pC]; the price variable
    is lambda_e under indexed regulation and the retail price itself under
    free prices, both in pounds/kWh here.  Second-stage quantities are
    eliminated through the demand model, the energy balance and the PPA
    availability link, leaving

        profit_w(x) = 0.5 * x' diag(curv_w) x + lin_w' x + const_w   [pounds]

    with curvature only on the price block.
    """
    n_scen, T = pool_p.shape
    dhat = spec.baseline_demand
    pool = pool_p / P_PER_POUND
    beta = beta_p * P_PER_POUND  # demand per pound/kWh
    pb_price = spec.pb_price / P_PER_POUND
    ppa_price = spec.ppa_price / P_PER_POUND

    curv = np.empty((n_scen, T))
    lin = np.empty((n_scen, T + 2))
    const = np.empty(n_scen)

    if spec.price_regulation == INDEXED:
        delta = pool - spec.lambda_e_bar / P_PER_POUND
    else:
        delta = np.zeros_like(pool)

    for w in range(n_scen):
        b = beta[w]
        d = delta[w]
        curv[w, :] = 2.0 * b
        lin[w, :T] = 2.0 * b * d + dhat - b * pool[w]
        lin[w, T] = np.sum(pool[w] - pb_price)
        lin[w, T + 1] = np.sum(avail[w] * (pool[w] - ppa_price))
        const[w] = np.sum(b * d * d + (dhat - b * pool[w]) * d - dhat * pool[w])
    return curv, lin, const


def profit(spec: ProblemSpec, scenario, x: FirstStage) -> float:
    """Profit in pounds of a first-stage point under one scenario."""
    pool, avail, beta, _ = _scenario_arrays(scenario)
    curv, lin, const = scenario_quadratics(spec, pool, avail, beta)
    T = spec.horizon
    if spec.price_regulation == INDEXED:
        if x.lambda_e is None:
            raise InvalidConfigError("indexed regulation requires a lambda_e vector")
        price = np.asarray(x.lambda_e, dtype=np.float64) / P_PER_POUND
    else:
        if x.retail is None:
            raise InvalidConfigError("free regulation requires a retail price vector")
        price = np.asarray(x.retail, dtype=np.float64) / P_PER_POUND
    vec = np.concatenate([price, [x.pb, x.ppa_contract]])
    quad = 0.5 * np.sum(curv[0] * price * price)
    return float(quad + lin[0] @ vec + const[0])


def expand_solution(
    spec: ProblemSpec,
    scen,
    price_vec_p: np.ndarray,
    pb: float,
    ppa_contract: float,
    eta: float | None = None,
    s: np.ndarray | None = None,
    solver: dict | None = None,
) -> TariffSolution:
    """Recover all second-stage quantities from a first-stage decision.

    ``price_vec_p`` is lambda_e (indexed) or the retail price (free), p/kWh.
    """
    from .stochastic import cvar  # local import to avoid a cycle

    pool_p, avail, beta_p, probs = _scenario_arrays(scen)
    n_scen, T = pool_p.shape
    dhat = spec.baseline_demand

    if spec.price_regulation == INDEXED:
        retail_p = price_vec_p[None, :] + (pool_p - spec.lambda_e_bar)
        lambda_e = np.array(price_vec_p, dtype=np.float64)
    else:
        retail_p = np.broadcast_to(price_vec_p, (n_scen, T)).copy()
        lambda_e = None

    demand = beta_p[:, None] * retail_p + dhat[None, :]
    ppa_delivered = avail * ppa_contract
    pool_purchase = demand - pb - ppa_delivered

    retail = retail_p / P_PER_POUND
    pool = pool_p / P_PER_POUND
    revenue = retail * demand
    cost = (
        pool * pool_purchase
        + (spec.pb_price / P_PER_POUND) * pb
        + (spec.ppa_price / P_PER_POUND) * ppa_delivered
    )
    profits = np.sum(revenue - cost, axis=1)
    expected = float(probs @ profits)
    cvar_val, var_val = cvar(profits, probs, spec.alpha)
    if eta is None:
        eta = var_val
    if s is None:
        s = np.maximum(0.0, eta - profits)
    objective = (1.0 - spec.chi) * expected + spec.chi * cvar_val
    return TariffSolution(
        price_regulation=spec.price_regulation,
        lambda_e=lambda_e,
        retail_price=retail_p,
        pb=float(pb),
        ppa_contract=float(ppa_contract),
        demand=demand,
        pool_purchase=pool_purchase,
        ppa_delivered=ppa_delivered,
        profits=profits,
        probabilities=probs,
        expected_profit=expected,
        eta=float(eta),
        s=np.asarray(s, dtype=np.float64),
        cvar=float(cvar_val),
        objective=float(objective),
        chi=spec.chi,
        alpha=spec.alpha,
        solver=dict(solver or {}),
    )


def validate_solution(sol: TariffSolution, spec: ProblemSpec, scen, feas_tol: float = 1e-8):
    """Independently re-verify every constraint of the formulation.

    Returns a list of violation messages; an empty list means the solution
    is feasible at ``feas_tol``.
    """
    pool_p, avail, beta_p, probs = _scenario_arrays(scen)
    n_scen, T = pool_p.shape
    out = []

    def check(name, err, scale=1.0):
        worst = float(np.max(np.abs(err))) if np.size(err) else 0.0
        if worst > feas_tol * max(1.0, scale):
            out.append(f"{name}: max violation {worst:.3e}")

    # demand model
    check(
        "demand link",
        sol.demand - (beta_p[:, None] * sol.retail_price + spec.baseline_demand[None, :]),
        scale=float(np.max(np.abs(sol.demand))),
    )
    # energy balance
    check(
        "energy balance",
        sol.demand - (sol.pool_purchase + sol.pb + sol.ppa_delivered),
        scale=float(np.max(np.abs(sol.demand))),
    )
    # PPA availability link
    check("ppa link", sol.ppa_delivered - avail * sol.ppa_contract, scale=spec.ppa_max)
    if spec.price_regulation == INDEXED:
        check(
            "pool indexing",
            sol.retail_price - (sol.lambda_e[None, :] + pool_p - spec.lambda_e_bar),
            scale=float(np.max(np.abs(sol.retail_price))),
        )
        day = spec.day_index()
        for d in range(len(spec.day_slots)):
            mean_d = float(np.mean(sol.lambda_e[day == d]))
            if abs(mean_d - spec.lambda_e_bar) > feas_tol * max(1.0, abs(spec.lambda_e_bar)):
                out.append(f"daily mean, day {d}: {mean_d!r} != {spec.lambda_e_bar!r}")
        lo, hi = spec.tariff_band()
        band_tol = feas_tol * max(1.0, abs(hi))
        if float(np.min(sol.lambda_e)) < lo - band_tol or float(np.max(sol.lambda_e)) > hi + band_tol:
            out.append("tariff band violated")
    # contract bounds
    tol_b = feas_tol * max(1.0, spec.pb_max)
    if not -tol_b <= sol.pb <= spec.pb_max + tol_b:
        out.append(f"forward contract out of bounds: {sol.pb}")
    tol_c = feas_tol * max(1.0, spec.ppa_max)
    if not -tol_c <= sol.ppa_contract <= spec.ppa_max + tol_c:
        out.append(f"ppa contract out of bounds: {sol.ppa_contract}")
    if spec.nonnegative_pool:
        check("pool nonnegativity", np.minimum(sol.pool_purchase, 0.0),
              scale=float(np.max(np.abs(sol.demand))))
    # profits recomputed from scratch
    retail = sol.retail_price / P_PER_POUND
    pool = pool_p / P_PER_POUND
    profits = np.sum(
        retail * sol.demand
        - pool * sol.pool_purchase
        - (spec.pb_price / P_PER_POUND) * sol.pb
        - (spec.ppa_price / P_PER_POUND) * sol.ppa_delivered,
        axis=1,
    )
    check("profit bookkeeping", profits - sol.profits, scale=float(np.max(np.abs(profits))))
    # CVaR inequalities
    scale_p = float(np.max(np.abs(profits))) if profits.size else 1.0
    if float(np.min(sol.s)) < -feas_tol * max(1.0, scale_p):
        out.append("negative CVaR auxiliary")
    shortfall = sol.eta - profits - sol.s
    if float(np.max(shortfall)) > feas_tol * max(1.0, scale_p):
        out.append(f"CVaR shortfall constraint violated by {float(np.max(shortfall)):.3e}")
    if abs(float(np.sum(probs)) - 1.0) > 1e-12:
        out.append("scenario probabilities do not sum to 1")
    return out


# ---------------------------------------------------------------------------
# file formats


def _load_toml(path):
    if sys.version_info >= (3, 11):
        import tomllib as toml
    else:  # pragma: no cover - depends on interpreter
        import tomli as toml
    with open(path, "rb") as fh:
        return toml.load(fh)


def load_problem_spec(path, baseline_override=None) -> ProblemSpec:
    """Read a problem spec from TOML or JSON.

    The baseline demand may be given inline (``baseline.values``) or as a
    path (``baseline.file``) holding one value per line, resolved relative
    to the spec file.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text())
    else:
        raw = _load_toml(path)
    try:
        horizon = raw["horizon"]
        tariff = raw["tariff"]
        contracts = raw["contracts"]
        risk = raw["risk"]
    except KeyError as exc:
        raise InvalidConfigError(f"problem spec missing section {exc}") from None
    days = int(horizon["days"])
    slots = int(horizon.get("slots_per_day", 48))
    start = horizon.get("start_date")
    if isinstance(start, str):
        start = _dt.date.fromisoformat(start)
    if isinstance(start, _dt.datetime):
        start = start.date()
    if baseline_override is not None:
        baseline = np.asarray(baseline_override, dtype=np.float64)
    else:
        section = raw.get("baseline", {})
        if "values" in section:
            baseline = np.asarray(section["values"], dtype=np.float64)
        elif "file" in section:
            baseline = np.loadtxt(path.parent / section["file"], ndmin=1)
        else:
            raise InvalidConfigError("problem spec needs baseline.values or baseline.file")
    return ProblemSpec(
        lambda_e_bar=float(tariff["lambda_e_bar"]),
        gamma=float(tariff["gamma"]),
        pb_price=float(contracts["base_price"]),
        pb_max=float(contracts["base_max"]),
        ppa_price=float(contracts["ppa_price"]),
        ppa_max=float(contracts["ppa_max"]),
        alpha=float(risk["alpha"]),
        chi=float(risk.get("chi", 0.0)),
        baseline_demand=baseline,
        day_slots=(slots,) * days,
        price_regulation=str(tariff.get("regulation", INDEXED)).lower(),
        start_date=start,
        nonnegative_pool=bool(raw.get("options", {}).get("nonnegative_pool", False)),
    )


def save_solution(sol: TariffSolution, path) -> None:
    payload = {
        "format_version": 1,
        "summary": {
            "price_regulation": sol.price_regulation,
            "pb_kwh": sol.pb,
            "ppa_contract_kwh": sol.ppa_contract,
            "expected_profit_gbp": sol.expected_profit,
            "cvar_gbp": sol.cvar,
            "var_gbp": sol.eta,
            "objective_gbp": sol.objective,
            "chi": sol.chi,
            "alpha": sol.alpha,
            "n_scenarios": int(sol.n_scenarios),
            "solver": sol.solver,
        },
        "lambda_e_p_per_kwh": None if sol.lambda_e is None else sol.lambda_e.tolist(),
        "retail_price_p_per_kwh": sol.retail_price.tolist(),
        "demand_kwh": sol.demand.tolist(),
        "pool_purchase_kwh": sol.pool_purchase.tolist(),
        "ppa_delivered_kwh": sol.ppa_delivered.tolist(),
        "profit_gbp": sol.profits.tolist(),
        "probability": sol.probabilities.tolist(),
        "cvar_shortfall_gbp": sol.s.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_solution(path) -> TariffSolution:
    raw = json.loads(Path(path).read_text())
    summary = raw["summary"]
    lam = raw["lambda_e_p_per_kwh"]
    profits = np.asarray(raw["profit_gbp"], dtype=np.float64)
    return TariffSolution(
        price_regulation=summary["price_regulation"],
        lambda_e=None if lam is None else np.asarray(lam, dtype=np.float64),
        retail_price=np.asarray(raw["retail_price_p_per_kwh"], dtype=np.float64),
        pb=float(summary["pb_kwh"]),
        ppa_contract=float(summary["ppa_contract_kwh"]),
        demand=np.asarray(raw["demand_kwh"], dtype=np.float64),
        pool_purchase=np.asarray(raw["pool_purchase_kwh"], dtype=np.float64),
        ppa_delivered=np.asarray(raw["ppa_delivered_kwh"], dtype=np.float64),
        profits=profits,
        probabilities=np.asarray(raw["probability"], dtype=np.float64),
        expected_profit=float(summary["expected_profit_gbp"]),
        eta=float(summary["var_gbp"]),
        s=np.asarray(raw["cvar_shortfall_gbp"], dtype=np.float64),
        cvar=float(summary["cvar_gbp"]),
        objective=float(summary["objective_gbp"]),
        chi=float(summary["chi"]),
        alpha=float(summary["alpha"]),
        solver=dict(summary.get("solver", {})),
    )
