"""Command-line interface.

The pipeline mirrors the library: ingest or synthesize meter data, fit a
demand model, generate and reduce scenarios, solve the tariff problem, and
run the experiment battery into a report directory.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import click
import numpy as np

from . import __version__, coeff_dist, experiments, regression
from .data import MeterSeries, SplitSpec, SynthConfig, ingest_csv, synthesize
from .errors import InvalidConfigError, TariffOptError
from .optimizer import load_problem_spec, save_solution, solve_stochastic
from .scenarios import (
    POOL,
    SOLAR,
    PathLibrary,
    ScenarioSet,
    assemble,
    fit_date_distributions,
    make_seasonal_library,
    reduce_scenarios,
    sample_paths,
)


def _fail(exc):
    raise click.ClickException(str(exc))


def _load_series(path) -> MeterSeries:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return ingest_csv(path)
    return MeterSeries.load(path)


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@click.group()
@click.version_option(__version__)
def cli():
    """Tariff and contract optimization for electricity retailers."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--schema", default=None, help="JSON mapping of canonical to file column names")
@click.option("--interpolate-gaps", is_flag=True, help="fill gaps of at most 2 slots linearly")
def ingest(input_path, out_path, schema, interpolate_gaps):
    """Validate a meter CSV and store it in binary form."""
    try:
        mapping = json.loads(schema) if schema else None
        series = ingest_csv(input_path, schema=mapping, interpolate_gaps=interpolate_gaps)
        series.save(out_path)
    except TariffOptError as exc:
        _fail(exc)
    click.echo(f"ingested {len(series)} records -> {out_path}")
    if series.imputed_slots:
        click.echo(f"imputed slots: {list(series.imputed_slots)}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def synth(config_path, seed, out_path):
    """Generate a synthetic meter series from a planted demand model."""
    try:
        cfg = SynthConfig.from_toml(config_path)
        series = synthesize(cfg, seed)
    except TariffOptError as exc:
        _fail(exc)
    if Path(out_path).suffix.lower() == ".csv":
        series.to_csv(out_path)
    else:
        series.save(out_path)
    click.echo(f"synthesized {len(series)} records -> {out_path}")


@cli.command()
@click.option("--model", type=click.Choice(["small", "large", "combined"]), required=True)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def fit(model, data_path, split_path, out_path):
    """Fit a demand model and store coefficients plus metadata."""
    try:
        series = _load_series(data_path)
        split = SplitSpec.from_toml(split_path)
        spec = regression.FeatureSpec(model)
        if model == "combined":
            fitted = regression.fit_combined(series, spec, split)
            dm_test = regression.build_features(series, spec, split, "test")
            metrics = regression.evaluate(fitted, dm_test)
        else:
            dm = regression.build_features(series, spec, split, "train")
            fitted = regression.fit_ols(dm)
            dm_test = regression.build_features(series, spec, split, "test")
            metrics = regression.evaluate(fitted, dm_test)
        extra = {
            "metrics": {
                "mae_train": metrics.mae_train,
                "rmse_train": metrics.rmse_train,
                "mae_test": metrics.mae_test,
                "rmse_test": metrics.rmse_test,
                "r2_train": metrics.r2,
            },
            "data_digest": _digest(data_path),
        }
        if model != "combined":
            dist = coeff_dist.beta1_distribution(fitted, dm)
            extra["beta_distribution"] = {"mean": dist.mean, "std": dist.std}
        regression.save_fit(fitted, out_path, split=split, extra=extra)
    except TariffOptError as exc:
        _fail(exc)
    click.echo(
        f"fit {model}: rmse train {metrics.rmse_train:.4g}, rmse test {metrics.rmse_test:.4g}, "
        f"r2 {metrics.r2:.4g} -> {out_path}"
    )


@cli.command("diagnose-clt")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--sizes", required=True, help="comma-separated bootstrap sizes")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", default=None, type=click.Path())
def diagnose_clt(fit_path, data_path, sizes, seed, out_path):
    """Bootstrap eigenvalue curves and the Noether ratio for a fitted design."""
    try:
        fitted, split = regression.load_fit(fit_path)
        if split is None:
            raise InvalidConfigError("fit file does not carry a split")
        series = _load_series(data_path)
        kind = fitted.fits[0].model_kind if hasattr(fitted, "fits") else fitted.model_kind
        dm = regression.build_features(series, regression.FeatureSpec(kind), split, "train")
        diag = coeff_dist.clt_diagnostic(dm, [int(s) for s in sizes.split(",")], seed)
    except TariffOptError as exc:
        _fail(exc)
    text = diag.to_csv()
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)
    status = "FAIL" if diag.failed else "ok"
    click.echo(f"noether ratio {diag.noether_ratio:.4g} (threshold {diag.threshold}) -> {status}")
    for note in diag.notes:
        click.echo(f"note: {note}")


@cli.command("gen-scenarios")
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--solar", "solar_path", required=True, type=click.Path(exists=True))
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", default=None, type=click.Path(exists=True),
              help="meter data; only needed when fit.json lacks the sampling distribution")
@click.option("--count", default=1000, type=int, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def gen_scenarios(pool_path, solar_path, fit_path, data_path, count, seed, out_path):
    """Sample joint pool/solar/price-coefficient scenarios for the test month."""
    try:
        fitted, split = regression.load_fit(fit_path)
        if split is None:
            raise InvalidConfigError("fit file does not carry a split")
        if hasattr(fitted, "fits"):
            raise InvalidConfigError("scenario generation needs a single-model fit")
        import json as _json

        stored = _json.loads(Path(fit_path).read_text()).get("extra", {}).get("beta_distribution")
        if stored is not None:
            dist = coeff_dist.PriceCoeffDistribution(
                mean=float(stored["mean"]), std=float(stored["std"])
            )
        elif data_path is not None:
            series = _load_series(data_path)
            dm = regression.build_features(
                series, regression.FeatureSpec(fitted.model_kind), split, "train"
            )
            dist = coeff_dist.beta1_distribution(fitted, dm)
        else:
            raise InvalidConfigError(
                "fit file lacks a sampling distribution; pass --data to recompute it"
            )
        pool_lib = PathLibrary.from_csv(pool_path, POOL)
        solar_lib = PathLibrary.from_csv(solar_path, SOLAR)
        targets = np.arange(
            np.datetime64(split.test[0], "D"),
            np.datetime64(split.test[1], "D") + np.timedelta64(1, "D"),
        )
        pool_paths = sample_paths(
            pool_lib, fit_date_distributions(pool_lib, split), targets, count, seed, substream=0
        )
        solar_paths = sample_paths(
            solar_lib, fit_date_distributions(solar_lib, split), targets, count, seed, substream=1
        )
        betas = coeff_dist.sample_beta(dist, count, seed)
        sset = assemble(pool_paths, solar_paths, betas, beta_mean=dist.mean, beta_std=dist.std)
        sset.save(out_path)
    except TariffOptError as exc:
        _fail(exc)
    click.echo(
        f"{count} scenarios over {targets.size} days "
        f"(beta ~ N({dist.mean:.4g}, {dist.std:.4g}^2)) -> {out_path}"
    )


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--bandwidth", default="auto", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def reduce(in_path, spec_path, bandwidth, out_path):
    """Reduce a raw scenario set by deterministic-objective clustering."""
    try:
        sset = ScenarioSet.load(in_path)
        spec = load_problem_spec(spec_path)
        bw = bandwidth if bandwidth == "auto" else float(bandwidth)
        red = reduce_scenarios(sset, spec, bandwidth=bw)
        red.save(out_path)
    except TariffOptError as exc:
        _fail(exc)
    click.echo(
        f"{sset.n_scenarios} -> {red.n_scenarios} scenarios "
        f"(bandwidth {red.bandwidth:.4g} GBP) -> {out_path}"
    )


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scn_path", required=True, type=click.Path(exists=True))
@click.option("--chi", default=None, type=float, help="override the spec's risk weight")
@click.option("--out", "out_path", required=True, type=click.Path())
def solve(spec_path, scn_path, chi, out_path):
    """Solve the risk-averse tariff and contracting problem."""
    try:
        spec = load_problem_spec(spec_path)
        if chi is not None:
            spec = spec.with_chi(chi)
        sset = ScenarioSet.load(scn_path)
        sol = solve_stochastic(spec, sset)
        save_solution(sol, out_path)
    except TariffOptError as exc:
        _fail(exc)
    click.echo(
        f"expected profit {sol.expected_profit:.2f} GBP, CVaR {sol.cvar:.2f} GBP, "
        f"pB {sol.pb:.2f} kWh, pPPA {sol.ppa_contract:.2f} kWh -> {out_path}"
    )


def _load_spec_and_set(spec_path, scn_path):
    spec = load_problem_spec(spec_path)
    sset = ScenarioSet.load(scn_path)
    return spec, sset


def _base_inputs(spec_path, scn_path, seed, **extra):
    inputs = {
        "spec_digest": _digest(spec_path),
        "scenarios_digest": _digest(scn_path),
        "seed": seed,
    }
    inputs.update(extra)
    return inputs


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scn_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--chis", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1", show_default=True)
def frontier(spec_path, scn_path, out_dir, seed, chis):
    """Trace the expected-profit / CVaR efficient frontier."""
    try:
        spec, sset = _load_spec_and_set(spec_path, scn_path)
        chi_list = [float(c) for c in chis.split(",")]
        res = experiments.efficient_frontier(spec, sset, chi_list)
        experiments.report(
            out_dir,
            inputs=_base_inputs(spec_path, scn_path, seed, chis=chi_list),
            frontier=res,
        )
    except TariffOptError as exc:
        _fail(exc)
    click.echo(
        f"{len(res.points)} frontier points, monotone={res.expected_monotone and res.cvar_monotone}, "
        f"validator failures {res.validator_failures} -> {out_dir}"
    )


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scn_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--pb-prices", default="4.0,4.3,4.6,4.9,5.2", show_default=True)
@click.option("--ppa-prices", default="4.2,4.5,4.8,5.1,5.4", show_default=True)
@click.option("--chi", default=0.0, type=float, show_default=True)
def grid(spec_path, scn_path, out_dir, seed, pb_prices, ppa_prices, chi):
    """Contract take-up over a grid of forward and PPA prices."""
    try:
        spec, sset = _load_spec_and_set(spec_path, scn_path)
        pb = [float(p) for p in pb_prices.split(",")]
        ppa = [float(p) for p in ppa_prices.split(",")]
        res = experiments.contract_grid(spec, sset, pb, ppa, chi)
        experiments.report(
            out_dir,
            inputs=_base_inputs(spec_path, scn_path, seed, pb=pb, ppa=ppa, chi=chi),
            grid=res,
        )
    except TariffOptError as exc:
        _fail(exc)
    click.echo(f"{len(res.cells)} grid cells, validator failures {res.validator_failures} -> {out_dir}")


@cli.command("beta-sweep")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scn_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--shifts", default="0,1,2,4,8", show_default=True)
@click.option("--chi", default=0.0, type=float, show_default=True)
@click.option("--regulation", type=click.Choice(["indexed", "free"]), default="indexed", show_default=True)
@click.option("--beta-mean", default=None, type=float, help="override the stored sampling mean")
@click.option("--beta-std", default=None, type=float, help="override the stored sampling std")
def beta_sweep(spec_path, scn_path, out_dir, seed, shifts, chi, regulation, beta_mean, beta_std):
    """Re-solve under increasingly price-sensitive consumers."""
    try:
        spec, sset = _load_spec_and_set(spec_path, scn_path)
        mean = beta_mean if beta_mean is not None else sset.beta_mean
        std = beta_std if beta_std is not None else sset.beta_std
        if mean is None or std is None:
            raise InvalidConfigError(
                "scenario file has no sampling distribution; pass --beta-mean/--beta-std"
            )
        dist = coeff_dist.PriceCoeffDistribution(mean=float(mean), std=float(std))
        shift_list = [float(s) for s in shifts.split(",")]
        pts = experiments.beta_shift_sweep(spec, sset, dist, shift_list, chi, regulation, seed)
        experiments.report(
            out_dir,
            inputs=_base_inputs(
                spec_path, scn_path, seed, shifts=shift_list, chi=chi, regulation=regulation
            ),
            sweep=pts,
        )
    except TariffOptError as exc:
        _fail(exc)
    click.echo(f"{len(pts)} sweep points ({regulation}) -> {out_dir}")


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scn_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--chis", default="0,0.5,1", show_default=True)
def report(spec_path, scn_path, out_dir, seed, chis):
    """Full battery: frontier, profit distributions, price bands, reduction ECDF."""
    try:
        spec, sset = _load_spec_and_set(spec_path, scn_path)
        chi_list = [float(c) for c in chis.split(",")]
        res = experiments.efficient_frontier(spec, sset, chi_list)
        sols = {f"chi={c:g}": solve_stochastic(spec.with_chi(c), sset) for c in (chi_list[0], chi_list[-1])}
        experiments.report(
            out_dir,
            inputs=_base_inputs(spec_path, scn_path, seed, chis=chi_list),
            frontier=res,
            solutions=sols,
            reduced_set=sset if sset.provenance == "reduced" else None,
            spec=spec,
        )
    except TariffOptError as exc:
        _fail(exc)
    click.echo(f"report with {len(res.points)} frontier points -> {out_dir}")


@cli.command()
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def baseline(fit_path, data_path, out_path):
    """Export the price-free demand component over the test range."""
    try:
        fitted, split = regression.load_fit(fit_path)
        if split is None:
            raise InvalidConfigError("fit file does not carry a split")
        series = _load_series(data_path)
        kind = fitted.fits[0].model_kind if hasattr(fitted, "fits") else fitted.model_kind
        dm = regression.build_features(series, regression.FeatureSpec(kind), split, "test")
        if hasattr(fitted, "fits"):
            pred = fitted.predict(dm)
            price_term = np.array(
                [fitted.fits[s].beta[dm.price_index] for s in dm.slot_of_day]
            ) * dm.X[:, dm.price_index]
            dhat = pred - price_term
        else:
            dhat = fitted.price_free_component(dm)
    except TariffOptError as exc:
        _fail(exc)
    lines = ["# baseline demand, kWh per half-hour slot"]
    lines += [repr(float(v)) for v in dhat]
    Path(out_path).write_text("\n".join(lines) + "\n")
    click.echo(f"{dhat.size} baseline slots -> {out_path}")


@cli.command("synth-paths")
@click.option("--role", type=click.Choice(["pool", "solar"]), required=True)
@click.option("--start-year", default=2010, type=int, show_default=True)
@click.option("--end-year", default=2014, type=int, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def synth_paths(role, start_year, end_year, seed, out_path):
    """Generate a synthetic seasonal path library CSV (pool or solar)."""
    try:
        lib = make_seasonal_library(role, start_year, end_year, seed)
        lib.to_csv(out_path)
    except TariffOptError as exc:
        _fail(exc)
    click.echo(f"{len(lib)} daily {role} paths -> {out_path}")


def main():
    cli(prog_name="tariff-opt")


if __name__ == "__main__":
    main()
