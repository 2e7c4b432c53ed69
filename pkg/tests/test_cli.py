from __future__ import annotations

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from tariff_opt.cli import cli
from tariff_opt.data import MeterSeries
from tariff_opt.optimizer import load_solution
from tariff_opt.scenarios import ScenarioSet

SYNTH_TOML = """\
start = "2013-01-01"
days = 120
noise_sigma = 6.0
"""

SPLIT_TOML = """\
[train]
start = 2013-01-01
end = 2013-03-31

[validation]
start = 2013-04-01
end = 2013-04-10

[test]
start = 2013-04-11
end = 2013-04-16
"""

SPEC_TOML = """\
[horizon]
start_date = 2013-04-11
days = 6
slots_per_day = 48

[tariff]
lambda_e_bar = 1.0
gamma = 0.25
regulation = "indexed"

[contracts]
base_price = 4.6
base_max = 80.0
ppa_price = 4.8
ppa_max = 80.0

[risk]
alpha = 0.9
chi = 0.0

[baseline]
file = "dhat.csv"
"""


def run(runner, args):
    result = runner.invoke(cli, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Full pipeline: synth -> fit -> paths -> scenarios -> reduce -> solve."""
    root = tmp_path_factory.mktemp("pipeline")
    runner = CliRunner()
    (root / "synth.toml").write_text(SYNTH_TOML)
    (root / "split.toml").write_text(SPLIT_TOML)
    run(runner, ["synth", "--config", str(root / "synth.toml"), "--seed", "11",
                 "--out", str(root / "meter.npz")])
    run(runner, ["fit", "--model", "large", "--data", str(root / "meter.npz"),
                 "--split", str(root / "split.toml"), "--out", str(root / "fit.json")])
    run(runner, ["synth-paths", "--role", "pool", "--seed", "3", "--out", str(root / "pool.csv")])
    run(runner, ["synth-paths", "--role", "solar", "--seed", "4", "--out", str(root / "solar.csv")])
    run(runner, ["gen-scenarios", "--pool", str(root / "pool.csv"), "--solar", str(root / "solar.csv"),
                 "--fit", str(root / "fit.json"), "--data", str(root / "meter.npz"),
                 "--count", "40", "--seed", "5", "--out", str(root / "raw.scn")])
    run(runner, ["baseline", "--fit", str(root / "fit.json"), "--data", str(root / "meter.npz"),
                 "--out", str(root / "dhat.csv")])
    (root / "spec.toml").write_text(SPEC_TOML)
    run(runner, ["reduce", "--in", str(root / "raw.scn"), "--spec", str(root / "spec.toml"),
                 "--out", str(root / "reduced.scn")])
    run(runner, ["solve", "--spec", str(root / "spec.toml"), "--scenarios", str(root / "reduced.scn"),
                 "--chi", "0.3", "--out", str(root / "sol.json")])
    return root


class TestPipeline:
    def test_synth_and_roundtrip(self, workdir):
        series = MeterSeries.load(workdir / "meter.npz")
        assert len(series) == 120 * 48

    def test_fit_metrics_recorded(self, workdir):
        raw = json.loads((workdir / "fit.json").read_text())
        assert raw["model_kind"] == "large"
        assert raw["extra"]["metrics"]["rmse_test"] > 0
        assert "price" in raw["fit"]["column_names"]

    def test_scenarios_well_formed(self, workdir):
        sset = ScenarioSet.load(workdir / "raw.scn")
        assert sset.n_scenarios == 40
        assert sset.horizon == 6 * 48
        assert sset.beta_mean is not None
        assert np.all(sset.beta < 0)
        assert sset.availability.min() >= 0 and sset.availability.max() <= 1

    def test_reduction_shrinks(self, workdir):
        raw = ScenarioSet.load(workdir / "raw.scn")
        red = ScenarioSet.load(workdir / "reduced.scn")
        assert red.provenance == "reduced"
        assert 1 <= red.n_scenarios <= raw.n_scenarios
        assert abs(red.probabilities.sum() - 1.0) < 1e-12
        assert red.raw_objectives.size == raw.n_scenarios

    def test_solution_sane(self, workdir):
        sol = load_solution(workdir / "sol.json")
        assert sol.chi == 0.3
        assert sol.cvar <= sol.expected_profit + 1e-9
        assert 0.0 <= sol.pb <= 80.0 + 1e-9

    def test_baseline_positive(self, workdir):
        vals = np.loadtxt(workdir / "dhat.csv")
        assert vals.size == 6 * 48
        assert np.all(vals > 0)

    def test_determinism_of_gen_scenarios(self, workdir):
        runner = CliRunner()
        out2 = workdir / "raw2.scn"
        run(runner, ["gen-scenarios", "--pool", str(workdir / "pool.csv"),
                     "--solar", str(workdir / "solar.csv"), "--fit", str(workdir / "fit.json"),
                     "--data", str(workdir / "meter.npz"), "--count", "40", "--seed", "5",
                     "--out", str(out2)])
        a = ScenarioSet.load(workdir / "raw.scn")
        b = ScenarioSet.load(out2)
        assert np.array_equal(a.pool, b.pool)
        assert np.array_equal(a.beta, b.beta)

    def test_gen_scenarios_without_data_uses_stored_distribution(self, workdir):
        runner = CliRunner()
        out3 = workdir / "raw3.scn"
        run(runner, ["gen-scenarios", "--pool", str(workdir / "pool.csv"),
                     "--solar", str(workdir / "solar.csv"), "--fit", str(workdir / "fit.json"),
                     "--count", "40", "--seed", "5", "--out", str(out3)])
        a = ScenarioSet.load(workdir / "raw.scn")
        c = ScenarioSet.load(out3)
        assert np.array_equal(a.beta, c.beta)
        assert np.array_equal(a.pool, c.pool)


class TestExperimentCommands:
    def test_frontier_cmd(self, workdir):
        runner = CliRunner()
        out = workdir / "frontier_run"
        run(runner, ["frontier", "--spec", str(workdir / "spec.toml"),
                     "--scenarios", str(workdir / "reduced.scn"), "--out-dir", str(out),
                     "--chis", "0,0.5,1"])
        assert (out / "frontier.csv").exists()
        assert (out / "frontier.svg").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_hash"]

    def test_grid_cmd(self, workdir):
        runner = CliRunner()
        out = workdir / "grid_run"
        run(runner, ["grid", "--spec", str(workdir / "spec.toml"),
                     "--scenarios", str(workdir / "reduced.scn"), "--out-dir", str(out),
                     "--pb-prices", "4.0,5.0", "--ppa-prices", "4.2,5.2"])
        text = (out / "contract_grid.csv").read_text()
        assert len(text.strip().splitlines()) == 5

    def test_beta_sweep_cmd(self, workdir):
        runner = CliRunner()
        out = workdir / "sweep_run"
        run(runner, ["beta-sweep", "--spec", str(workdir / "spec.toml"),
                     "--scenarios", str(workdir / "reduced.scn"), "--out-dir", str(out),
                     "--shifts", "0,2", "--regulation", "indexed"])
        lines = (out / "beta_shift_sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 3

    def test_report_cmd_byte_identical(self, workdir):
        runner = CliRunner()
        out1 = workdir / "report_a"
        out2 = workdir / "report_b"
        args = ["report", "--spec", str(workdir / "spec.toml"),
                "--scenarios", str(workdir / "reduced.scn"), "--seed", "7", "--chis", "0,1"]
        run(runner, args + ["--out-dir", str(out1)])
        run(runner, args + ["--out-dir", str(out2)])
        names1 = sorted(p.name for p in out1.iterdir())
        names2 = sorted(p.name for p in out2.iterdir())
        assert names1 == names2
        match, mismatch, errors = filecmp.cmpfiles(out1, out2, names1, shallow=False)
        assert mismatch == [] and errors == []
        assert "reduction_ecdf.svg" in names1


class TestCliErrors:
    def test_bad_csv_fails_cleanly(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,demand_kwh\n2013-01-01T00:00,1.0\n")
        runner = CliRunner()
        result = runner.invoke(cli, ["ingest", "--input", str(bad), "--out", str(tmp_path / "o.npz")])
        assert result.exit_code != 0
        assert "missing required columns" in result.output

    def test_solve_with_mismatched_horizon(self, workdir, tmp_path):
        spec2 = tmp_path / "spec2.toml"
        spec2.write_text(SPEC_TOML.replace("days = 6", "days = 5"))
        (tmp_path / "dhat.csv").write_text(
            "\n".join(["200.0"] * (5 * 48)) + "\n"
        )
        runner = CliRunner()
        result = runner.invoke(cli, ["solve", "--spec", str(spec2),
                                     "--scenarios", str(workdir / "reduced.scn"),
                                     "--out", str(tmp_path / "sol.json")])
        assert result.exit_code != 0
