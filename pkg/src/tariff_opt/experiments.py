"""The experiment battery: efficient frontier, contract-price grids, the
elasticity-shift sweep, and machine-readable reports with static plots.

Every experiment is a pure function of (problem spec, scenario set, seed);
rendering is deterministic byte for byte, so rerunning a report into a
fresh directory reproduces it exactly.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from . import svgplot
from .coeff_dist import PriceCoeffDistribution, sample_beta
from .errors import ReportInputError
from .optimizer import solve_free_price, solve_stochastic, validate_solution
from .optimizer.problem import FREE, INDEXED, ProblemSpec, TariffSolution
from .scenarios import ScenarioSet, wasserstein_1d


@dataclass(frozen=True)
class FrontierPoint:
    chi: float
    expected_profit: float      # pounds
    cvar: float                 # pounds


@dataclass(frozen=True)
class FrontierResult:
    points: tuple
    expected_monotone: bool
    cvar_monotone: bool
    max_violation: float        # relative, over both monotonicity checks
    validator_failures: int


@dataclass(frozen=True)
class GridCell:
    pb_price: float             # p/kWh
    ppa_price: float            # p/kWh
    pb_fraction: float          # of pb_max
    ppa_fraction: float         # of ppa_max


@dataclass(frozen=True)
class GridResult:
    cells: tuple
    pb_prices: tuple
    ppa_prices: tuple
    chi: float
    validator_failures: int


@dataclass(frozen=True)
class ShiftSweepPoint:
    beta_shift: float
    average_price: float        # p/kWh, probability-weighted over slots
    expected_profit: float      # pounds
    profit_quantiles: tuple     # (min, q10, q25, median, q75, q90, max)
    reasonable_price: bool      # below twice the mean pool price
    chi: float
    regulation: str


MONOTONE_TOL = 1e-5


def efficient_frontier(spec: ProblemSpec, sset, chis) -> FrontierResult:
    """One stochastic solve per risk weight, sorted by chi."""
    chis = sorted(float(c) for c in chis)
    points = []
    failures = 0
    for chi in chis:
        sol = solve_stochastic(spec.with_chi(chi), sset)
        failures += bool(validate_solution(sol, spec.with_chi(chi), sset))
        points.append(FrontierPoint(chi=chi, expected_profit=sol.expected_profit, cvar=sol.cvar))
    worst = 0.0
    e_ok = c_ok = True
    for a, b in zip(points, points[1:]):
        scale_e = max(1.0, abs(a.expected_profit))
        scale_c = max(1.0, abs(a.cvar))
        if b.expected_profit > a.expected_profit + MONOTONE_TOL * scale_e:
            e_ok = False
        if b.cvar < a.cvar - MONOTONE_TOL * scale_c:
            c_ok = False
        worst = max(
            worst,
            (b.expected_profit - a.expected_profit) / scale_e,
            (a.cvar - b.cvar) / scale_c,
        )
    return FrontierResult(
        points=tuple(points),
        expected_monotone=e_ok,
        cvar_monotone=c_ok,
        max_violation=max(0.0, worst),
        validator_failures=failures,
    )


def average_price(solution: TariffSolution, sset=None) -> float:
    """Probability-weighted retail price averaged over the horizon, p/kWh."""
    probs = solution.probabilities if sset is None else np.asarray(sset.probabilities)
    return float(np.mean(probs @ solution.retail_price))


def contract_grid(spec: ProblemSpec, sset, pb_prices, ppa_prices, chi: float) -> GridResult:
    """Solve the stochastic problem on a grid of contract price pairs."""
    cells = []
    failures = 0
    for pb_p in pb_prices:
        for ppa_p in ppa_prices:
            spec2 = spec.with_contract_prices(pb_price=pb_p, ppa_price=ppa_p).with_chi(chi)
            sol = solve_stochastic(spec2, sset)
            failures += bool(validate_solution(sol, spec2, sset))
            cells.append(
                GridCell(
                    pb_price=float(pb_p),
                    ppa_price=float(ppa_p),
                    pb_fraction=sol.pb / spec.pb_max if spec.pb_max > 0 else 0.0,
                    ppa_fraction=sol.ppa_contract / spec.ppa_max if spec.ppa_max > 0 else 0.0,
                )
            )
    return GridResult(
        cells=tuple(cells),
        pb_prices=tuple(float(p) for p in pb_prices),
        ppa_prices=tuple(float(p) for p in ppa_prices),
        chi=float(chi),
        validator_failures=failures,
    )


def weighted_quantiles(values, probs, qs) -> np.ndarray:
    """Quantiles of a discrete distribution (inverse of the weighted ECDF)."""
    values = np.asarray(values, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    v = values[order]
    c = np.cumsum(probs[order])
    out = np.empty(len(qs))
    for i, q in enumerate(qs):
        j = int(np.searchsorted(c, q * c[-1], side="left"))
        out[i] = v[min(j, v.size - 1)]
    return out


def profit_summary(solution: TariffSolution) -> tuple:
    qs = weighted_quantiles(solution.profits, solution.probabilities, [0.10, 0.25, 0.50, 0.75, 0.90])
    return (
        float(np.min(solution.profits)),
        float(qs[0]),
        float(qs[1]),
        float(qs[2]),
        float(qs[3]),
        float(qs[4]),
        float(np.max(solution.profits)),
    )


def beta_shift_sweep(
    spec: ProblemSpec,
    sset,
    dist: PriceCoeffDistribution,
    shifts,
    chi: float,
    regulation: str,
    seed: int,
) -> list:
    """Re-sample the price coefficient per shift (same seed, so draws are
    paired) and re-solve; reports the average retail price and the profit
    distribution summary per shift."""
    n = np.asarray(sset.beta).size
    mean_pool = float(np.mean(np.asarray(sset.probabilities) @ np.asarray(sset.pool)))
    points = []
    for shift in shifts:
        betas = sample_beta(dist.with_shift(shift), n, seed)
        shifted = ScenarioSet(
            pool=sset.pool,
            availability=sset.availability,
            beta=betas,
            probabilities=sset.probabilities,
            provenance=getattr(sset, "provenance", "raw"),
        )
        spec2 = spec.with_chi(chi)
        if regulation == FREE:
            sol = solve_free_price(spec2, shifted)
        else:
            sol = solve_stochastic(replace(spec2, price_regulation=INDEXED), shifted)
        avg = average_price(sol)
        points.append(
            ShiftSweepPoint(
                beta_shift=float(shift),
                average_price=avg,
                expected_profit=sol.expected_profit,
                profit_quantiles=profit_summary(sol),
                reasonable_price=bool(avg <= 2.0 * mean_pool),
                chi=float(chi),
                regulation=regulation,
            )
        )
    return points


# ---------------------------------------------------------------------------
# report rendering


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row
            )
        )
    return "\n".join(lines) + "\n"


def _weekday_bands(solution: TariffSolution, spec: ProblemSpec):
    start = spec.start_date or _dt.date(2013, 12, 1)
    T = solution.retail_price.shape[1]
    slots_per_day = spec.day_slots[0]
    bands = []
    probs = solution.probabilities
    for wd in range(7):
        xs, mean, lo, hi = [], [], [], []
        for s in range(slots_per_day):
            cols = [
                d * slots_per_day + s
                for d in range(len(spec.day_slots))
                if (start + _dt.timedelta(days=d)).weekday() == wd
            ]
            if not cols:
                continue
            block = solution.retail_price[:, cols]
            xs.append(s)
            mean.append(float(np.mean(probs @ block)))
            lo.append(float(block.min()))
            hi.append(float(block.max()))
        if xs:
            bands.append((wd, xs, mean, lo, hi))
    return bands


WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


def report(
    out_dir,
    *,
    inputs: dict,
    frontier: FrontierResult | None = None,
    grid: GridResult | None = None,
    sweep: list | None = None,
    solutions: dict | None = None,
    reduced_set: ScenarioSet | None = None,
    spec: ProblemSpec | None = None,
) -> dict:
    """Write CSV tables and SVG plots for the supplied artifacts.

    ``inputs`` feeds the manifest's config hash; pass everything that
    defines the run (spec file content, scenario digest, seed, grids).
    Artifacts that are present but empty raise rather than producing empty
    files.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    def emit(name, text):
        (out / name).write_text(text)
        written[name] = hashlib.sha256(text.encode()).hexdigest()

    if frontier is not None:
        if not frontier.points:
            raise ReportInputError("frontier has no points")
        rows = [(p.chi, p.expected_profit, p.cvar) for p in frontier.points]
        emit("frontier.csv", _csv(rows, ["chi", "expected_profit_gbp", "cvar_gbp"]))
        emit(
            "frontier.svg",
            svgplot.line_plot(
                [("expected profit", [p.cvar for p in frontier.points],
                  [p.expected_profit for p in frontier.points])],
                title="Efficient frontier",
                x_label="CVaR (GBP)",
                y_label="expected profit (GBP)",
            ),
        )

    if grid is not None:
        if not grid.cells:
            raise ReportInputError("grid has no cells")
        rows = [(c.pb_price, c.ppa_price, c.pb_fraction, c.ppa_fraction) for c in grid.cells]
        emit(
            "contract_grid.csv",
            _csv(rows, ["pb_price_p", "ppa_price_p", "pb_fraction", "ppa_fraction"]),
        )
        nb, npp = len(grid.pb_prices), len(grid.ppa_prices)
        pb_mat = np.array([c.pb_fraction for c in grid.cells]).reshape(nb, npp)
        ppa_mat = np.array([c.ppa_fraction for c in grid.cells]).reshape(nb, npp)
        emit(
            "contract_grid_pb.svg",
            svgplot.heatmap(
                pb_mat,
                [f"{p:g}" for p in grid.pb_prices],
                [f"{p:g}" for p in grid.ppa_prices],
                title="Forward contract take-up (fraction of max)",
                x_label="PPA price (p/kWh)",
                y_label="forward price (p/kWh)",
            ),
        )
        emit(
            "contract_grid_ppa.svg",
            svgplot.heatmap(
                ppa_mat,
                [f"{p:g}" for p in grid.pb_prices],
                [f"{p:g}" for p in grid.ppa_prices],
                title="PPA take-up (fraction of max)",
                x_label="PPA price (p/kWh)",
                y_label="forward price (p/kWh)",
            ),
        )

    if sweep is not None:
        if not sweep:
            raise ReportInputError("sweep has no points")
        rows = [
            (
                p.beta_shift,
                p.average_price,
                p.expected_profit,
                *p.profit_quantiles,
                int(p.reasonable_price),
            )
            for p in sweep
        ]
        emit(
            "beta_shift_sweep.csv",
            _csv(
                rows,
                [
                    "beta_shift",
                    "average_price_p",
                    "expected_profit_gbp",
                    "profit_min",
                    "profit_q10",
                    "profit_q25",
                    "profit_median",
                    "profit_q75",
                    "profit_q90",
                    "profit_max",
                    "reasonable_price",
                ],
            ),
        )
        emit(
            "beta_shift_price.svg",
            svgplot.line_plot(
                [("average price", [p.beta_shift for p in sweep], [p.average_price for p in sweep])],
                title="Average retail price vs elasticity shift",
                x_label="beta shift",
                y_label="average price (p/kWh)",
            ),
        )
        emit(
            "beta_shift_profit.svg",
            svgplot.quantile_boxes(
                [(f"{p.beta_shift:g}", p.profit_quantiles) for p in sweep],
                title="Profit distribution vs elasticity shift",
                x_label="beta shift",
                y_label="profit (GBP)",
            ),
        )

    if solutions:
        rows = []
        series = []
        for label in sorted(solutions):
            sol = solutions[label]
            order = np.argsort(sol.profits, kind="stable")
            cum = np.cumsum(sol.probabilities[order])
            for v, c in zip(sol.profits[order], cum):
                rows.append((label, float(v), float(c)))
            series.append((label, sol.profits, sol.probabilities))
        emit("profit_cdf.csv", _csv(rows, ["label", "profit_gbp", "cumulative_probability"]))
        emit(
            "profit_cdf.svg",
            svgplot.ecdf_plot(series, title="Profit distributions", x_label="profit (GBP)"),
        )
        emit(
            "profit_boxes.svg",
            svgplot.quantile_boxes(
                [(label, profit_summary(solutions[label])) for label in sorted(solutions)],
                title="Profit summaries",
                y_label="profit (GBP)",
            ),
        )
        if spec is not None:
            band_rows = []
            for label in sorted(solutions):
                for wd, xs, mean, lo, hi in _weekday_bands(solutions[label], spec):
                    for i in range(len(xs)):
                        band_rows.append((label, WEEKDAYS[wd], xs[i], mean[i], lo[i], hi[i]))
            emit(
                "price_bands.csv",
                _csv(band_rows, ["label", "weekday", "slot", "mean_p", "min_p", "max_p"]),
            )
            first = solutions[sorted(solutions)[0]]
            bands = _weekday_bands(first, spec)
            emit(
                "price_bands.svg",
                svgplot.band_plot(
                    [(WEEKDAYS[wd], xs, mean, lo, hi) for wd, xs, mean, lo, hi in bands],
                    title="Retail price by weekday",
                    x_label="slot of day",
                    y_label="price (p/kWh)",
                ),
            )

    if reduced_set is not None and reduced_set.raw_objectives is not None:
        raw_f = reduced_set.raw_objectives
        raw_p = np.full(raw_f.size, 1.0 / raw_f.size)
        red_f = reduced_set.objective_values
        red_p = reduced_set.probabilities
        w1 = wasserstein_1d(raw_f, raw_p, red_f, red_p)
        rows = [("raw", float(v), float(p)) for v, p in zip(raw_f, raw_p)]
        rows += [("reduced", float(v), float(p)) for v, p in zip(red_f, red_p)]
        emit("reduction_ecdf.csv", _csv(rows, ["set", "objective_gbp", "probability"]))
        emit(
            "reduction_ecdf.svg",
            svgplot.ecdf_plot(
                [("raw", raw_f, raw_p), ("reduced", red_f, red_p)],
                title=f"Scenario reduction (W1 = {w1:.4g} GBP)",
                x_label="deterministic objective (GBP)",
            ),
        )

    manifest = {
        "format_version": 1,
        "package_version": _package_version(),
        "config_hash": hashlib.sha256(
            json.dumps(inputs, sort_keys=True, default=str).encode()
        ).hexdigest(),
        "inputs": inputs,
        "outputs": {k: written[k] for k in sorted(written)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str))
    return manifest


def _package_version() -> str:
    from . import __version__

    return __version__
