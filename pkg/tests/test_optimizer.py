from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import ScenSet, make_set, make_spec
from tariff_opt.errors import (
    InfeasibleError,
    InvalidConfigError,
    NonConcaveError,
    UnboundedError,
)
from tariff_opt.optimizer import (
    FirstStage,
    cvar,
    cvar_via_ipm,
    load_solution,
    profit,
    save_solution,
    solve_deterministic,
    solve_free_price,
    solve_stochastic,
    validate_solution,
)
from tariff_opt.optimizer.problem import ProblemSpec


def one_period_free_spec():
    # beta=-1, baseline=10, pool=5, no contracts; in these units the optimal
    # retail price is 7.5 and the optimal profit 6.25 pence (0.0625 pounds)
    return ProblemSpec(
        lambda_e_bar=1.0,
        gamma=0.25,
        pb_price=0.0,
        pb_max=0.0,
        ppa_price=0.0,
        ppa_max=0.0,
        alpha=0.9,
        chi=0.0,
        baseline_demand=np.array([10.0]),
        day_slots=(1,),
        price_regulation="free",
    )


def one_period_scen():
    return ScenSet([[5.0]], [[0.0]], [-1.0])


class TestProfit:
    def test_closed_form_single_period(self):
        spec = one_period_free_spec()
        scen = one_period_scen().single(0)
        val = profit(spec, scen, FirstStage(pb=0.0, ppa_contract=0.0, retail=np.array([7.5])))
        assert val * 100.0 == pytest.approx(6.25, abs=1e-12)

    def test_price_insensitive_demand_is_flat(self):
        spec = make_spec(T=2, days=(2,), baseline=np.array([50.0, 60.0]), regulation="free")
        scen = ScenSet([[8.0, 9.0]], [[0.0, 0.0]], [0.0]).single(0)
        # with beta = 0 the demand equals the baseline and profit is affine in
        # price with slope equal to the total demand
        v1 = profit(spec, scen, FirstStage(0.0, 0.0, retail=np.array([10.0, 10.0])))
        v2 = profit(spec, scen, FirstStage(0.0, 0.0, retail=np.array([11.0, 11.0])))
        v3 = profit(spec, scen, FirstStage(0.0, 0.0, retail=np.array([12.0, 12.0])))
        assert v3 - v2 == pytest.approx(v2 - v1, rel=1e-12)
        assert v2 - v1 == pytest.approx((50.0 + 60.0) * 0.01, rel=1e-12)

    def test_zero_availability_ignores_ppa_volume(self):
        spec = make_spec(T=4, days=(4,), baseline=np.full(4, 100.0), ppa_price=4.8, ppa_max=80.0)
        pool = [[10.0, 11.0, 12.0, 13.0]]
        scen0 = ScenSet(pool, [[0.0] * 4], [-2.0]).single(0)
        lam = np.full(4, 1.0)
        a = profit(spec, scen0, FirstStage(0.0, 0.0, lambda_e=lam))
        b = profit(spec, scen0, FirstStage(0.0, 80.0, lambda_e=lam))
        assert a == pytest.approx(b, abs=1e-12)

    def test_matches_raw_oracle(self):
        rng = np.random.default_rng(7)
        spec = make_spec(T=48, seed=7)
        scen = make_set(T=48, n_scen=1, seed=7)
        lam = spec.lambda_e_bar + rng.uniform(-0.2, 0.2, 48)
        val = profit(spec, scen.single(0), FirstStage(11.0, 22.0, lambda_e=lam))
        ref = oracles.raw_profits(
            spec, scen.pool, scen.availability, scen.beta, lam_e_p=lam, pb=11.0, pc=22.0
        )[0]
        assert val == pytest.approx(ref, rel=1e-12)


class TestCvar:
    def test_all_equal(self):
        c, v = cvar(np.full(5, 3.25), np.full(5, 0.2), 0.9)
        assert c == pytest.approx(3.25) and v == pytest.approx(3.25)

    def test_two_point_toy(self):
        c, v = cvar(np.array([0.0, 10.0]), np.array([0.5, 0.5]), 0.9)
        assert c == pytest.approx(0.0, abs=1e-12)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_enumeration_and_ipm_agree(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            profits = rng.normal(0.0, 10.0, n)
            probs = rng.dirichlet(np.ones(n))
            alpha = float(rng.uniform(0.5, 0.95))
            c_enum, v_enum = cvar(profits, probs, alpha)
            c_ref, _ = oracles.cvar_brute(profits, probs, alpha)
            assert c_enum == pytest.approx(c_ref, abs=1e-10)
            c_ipm, _ = cvar_via_ipm(profits, probs, alpha)
            assert c_ipm == pytest.approx(c_enum, abs=1e-8)

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=12),
        st.floats(0.05, 0.95),
        st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_never_exceeds_expectation(self, profits, alpha, seed):
        profits = np.asarray(profits)
        probs = np.random.default_rng(seed).dirichlet(np.ones(profits.size))
        c, _ = cvar(profits, probs, alpha)
        assert c <= float(probs @ profits) + 1e-9


class TestDeterministic:
    def test_closed_form_free_price(self):
        sol = solve_deterministic(one_period_free_spec(), one_period_scen().single(0))
        assert sol.retail_price[0, 0] == pytest.approx(7.5, abs=1e-9)
        assert sol.profits[0] * 100.0 == pytest.approx(6.25, abs=1e-9)

    def test_gamma_zero_pins_tariff(self):
        spec = make_spec(T=48, gamma=0.0, seed=5)
        scen = make_set(T=48, n_scen=1, seed=5)
        sol = solve_deterministic(spec, scen.single(0))
        assert np.allclose(sol.lambda_e, spec.lambda_e_bar, atol=1e-12)
        # retail pinned by indexing
        assert np.allclose(
            sol.retail_price, spec.lambda_e_bar + scen.pool - spec.lambda_e_bar, atol=1e-12
        )

    def test_nonconcave_rejected(self):
        spec = make_spec(T=48)
        scen = ScenSet(make_set(T=48).pool[:1], make_set(T=48).availability[:1], [0.5])
        with pytest.raises(NonConcaveError):
            solve_deterministic(spec, scen.single(0))

    def test_empty_band_rejected(self):
        with pytest.raises(InfeasibleError):
            make_spec(T=48, lambda_e_bar=-1.0, gamma=0.5).tariff_band()

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(21)
        for trial in range(5):
            spec = make_spec(
                T=4,
                days=(2, 2),
                baseline=rng.uniform(50, 150, 4),
                pb_max=2.0,
                ppa_max=2.0,
                pb_price=float(rng.uniform(8, 12)),
                ppa_price=float(rng.uniform(8, 12)),
                seed=trial,
            )
            scen = ScenSet(
                rng.uniform(8, 14, (1, 4)), rng.uniform(0, 1, (1, 4)), [-rng.uniform(1, 3)]
            )
            sol = solve_deterministic(spec, scen.single(0))
            ref_obj, _ = oracles.grid_search(
                spec, scen.pool, scen.availability, scen.beta, scen.probabilities
            )
            assert sol.profits[0] >= ref_obj - 1e-6
            assert sol.profits[0] == pytest.approx(ref_obj, abs=1e-2)

    def test_kkt_residual_reported_tiny(self, small_spec, small_set):
        sol = solve_deterministic(small_spec, small_set.single(0))
        assert sol.solver["residuals"]["kkt_stationarity"] < 1e-9

    def test_validator_accepts(self, small_spec, small_set):
        sol = solve_deterministic(small_spec, small_set.single(0))
        assert validate_solution(sol, small_spec, small_set.single(0)) == []


class TestStochastic:
    def test_single_scenario_matches_deterministic(self, small_spec, small_set):
        one = ScenSet(small_set.pool[:1], small_set.availability[:1], small_set.beta[:1])
        det = solve_deterministic(small_spec, one.single(0))
        for chi in (0.0, 0.4, 1.0):
            sol = solve_stochastic(small_spec.with_chi(chi), one)
            assert np.max(np.abs(sol.lambda_e - det.lambda_e)) < 5e-6
            assert sol.pb == pytest.approx(det.pb, abs=1e-5)
            assert sol.ppa_contract == pytest.approx(det.ppa_contract, abs=1e-5)
            if chi > 0:
                assert sol.eta == pytest.approx(det.profits[0], abs=1e-5)
                assert np.max(sol.s) < 1e-6

    def test_chi_zero_continuity(self, small_spec, small_set):
        base = solve_stochastic(small_spec, small_set).objective
        eps = solve_stochastic(small_spec.with_chi(1e-4), small_set).objective
        assert abs(eps - base) < 1e-3 * max(1.0, abs(base))

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            chi = float(rng.choice([0.0, 0.3, 0.7, 1.0]))
            spec = make_spec(
                T=4,
                days=(2, 2),
                chi=chi,
                baseline=rng.uniform(50, 150, 4),
                pb_max=2.0,
                ppa_max=2.0,
                pb_price=float(rng.uniform(9, 12)),
                ppa_price=float(rng.uniform(9, 12)),
                alpha=float(rng.uniform(0.6, 0.95)),
            )
            scen = ScenSet(
                rng.uniform(8, 14, (2, 4)),
                rng.uniform(0, 1, (2, 4)),
                -rng.uniform(1, 3, 2),
                probabilities=rng.dirichlet([2, 2]),
            )
            sol = solve_stochastic(spec, scen)
            obj = oracles.objective_of(
                spec, scen.pool, scen.availability, scen.beta, scen.probabilities, sol.profits
            )
            ref_obj, _ = oracles.grid_search(
                spec, scen.pool, scen.availability, scen.beta, scen.probabilities
            )
            assert obj >= ref_obj - 1e-6, f"trial {trial}: solver below a feasible grid point"
            assert obj == pytest.approx(ref_obj, abs=1e-2), f"trial {trial}"

    def test_duplication_invariance(self, small_spec, small_set):
        sol = solve_stochastic(small_spec.with_chi(0.5), small_set)
        dup = ScenSet(
            np.vstack([small_set.pool, small_set.pool]),
            np.vstack([small_set.availability, small_set.availability]),
            np.concatenate([small_set.beta, small_set.beta]),
            probabilities=np.concatenate([small_set.probabilities, small_set.probabilities]) / 2.0,
        )
        sol2 = solve_stochastic(small_spec.with_chi(0.5), dup)
        assert np.max(np.abs(sol.lambda_e - sol2.lambda_e)) < 1e-5
        assert sol.pb == pytest.approx(sol2.pb, abs=1e-4)
        assert sol.ppa_contract == pytest.approx(sol2.ppa_contract, abs=1e-4)

    def test_risk_neutral_contracts_bang_bang(self):
        scen = make_set(T=48, n_scen=6, seed=9)
        mean_pool = float(scen.probabilities @ scen.pool.mean(axis=1))
        for offset, expect_frac in ((-0.5, 1.0), (0.5, 0.0)):
            spec = make_spec(T=48, pb_price=mean_pool + offset, seed=9)
            sol = solve_stochastic(spec, scen)
            assert sol.pb / spec.pb_max == pytest.approx(expect_frac, abs=1e-6)
        avail_w = float(np.sum(scen.probabilities[:, None] * scen.availability * scen.pool)
                        / np.sum(scen.probabilities[:, None] * scen.availability))
        for offset, expect_frac in ((-0.5, 1.0), (0.5, 0.0)):
            spec = make_spec(T=48, ppa_price=avail_w + offset, seed=9)
            sol = solve_stochastic(spec, scen)
            assert sol.ppa_contract / spec.ppa_max == pytest.approx(expect_frac, abs=1e-6)

    def test_free_price_is_a_relaxation(self, small_spec, small_set):
        restricted = solve_stochastic(small_spec, small_set)
        free = solve_free_price(small_spec, small_set)
        assert free.expected_profit >= restricted.expected_profit - 1e-8

    def test_free_price_single_period_monopoly(self):
        sol = solve_free_price(one_period_free_spec(), one_period_scen())
        assert sol.retail_price[0, 0] == pytest.approx(7.5, abs=1e-7)
        assert sol.profits[0] * 100.0 == pytest.approx(6.25, abs=1e-7)

    def test_free_price_decreases_with_sensitivity(self):
        scen = make_set(T=48, n_scen=3, seed=13)
        spec = make_spec(T=48, regulation="free", seed=13)
        prices = []
        for shift in (0.0, 1.0, 2.0, 4.0):
            shifted = ScenSet(scen.pool, scen.availability, scen.beta - shift)
            sol = solve_stochastic(spec, shifted)
            prices.append(float(np.mean(sol.retail_price)))
        assert all(prices[i + 1] < prices[i] for i in range(len(prices) - 1))

    def test_errors(self, small_spec):
        good = make_set(T=48, n_scen=3, seed=1)
        mixed = ScenSet(good.pool, good.availability, [-1.0, 0.2, -2.0])
        with pytest.raises(NonConcaveError):
            solve_stochastic(small_spec, mixed)
        allpos = ScenSet(good.pool, good.availability, [0.1, 0.2, 0.3])
        with pytest.raises(UnboundedError):
            solve_free_price(small_spec, allpos)
        bad_probs = ScenSet(good.pool, good.availability, good.beta, probabilities=[0.5, 0.2, 0.2])
        with pytest.raises(ValueError):
            solve_stochastic(small_spec, bad_probs)

    def test_nonnegative_pool_flag(self):
        spec = make_spec(T=48, nonnegative_pool=True, seed=4, baseline=np.full(48, 120.0))
        scen = make_set(T=48, n_scen=3, seed=4)
        sol = solve_stochastic(spec, scen)
        assert float(np.min(sol.pool_purchase)) >= -1e-7
        assert validate_solution(sol, spec, scen) == []
        # the cut must bind: without it the optimum sells back to the pool
        plain = solve_stochastic(make_spec(T=48, seed=4, baseline=np.full(48, 120.0)), scen)
        assert float(np.min(plain.pool_purchase)) < -1e-3

    def test_validator_flags_corruption(self, small_spec, small_set):
        sol = solve_stochastic(small_spec, small_set)
        sol.demand = sol.demand + 1.0
        assert any("demand" in v or "balance" in v for v in validate_solution(sol, small_spec, small_set))

    def test_solution_roundtrip(self, tmp_path, small_spec, small_set):
        sol = solve_stochastic(small_spec.with_chi(0.3), small_set)
        path = tmp_path / "sol.json"
        save_solution(sol, path)
        back = load_solution(path)
        assert np.allclose(back.lambda_e, sol.lambda_e)
        assert np.allclose(back.profits, sol.profits)
        assert back.cvar == pytest.approx(sol.cvar)
        assert back.chi == sol.chi


class TestSolverFuzz:
    """Randomized robustness battery over regimes, sizes and risk weights."""

    def test_random_instances_solve_and_validate(self):
        rng = np.random.default_rng(77)
        for trial in range(30):
            T = int(rng.choice([4, 24, 48, 96]))
            days = (T,) if T < 48 else (48,) * (T // 48)
            n_scen = int(rng.integers(1, 9))
            regulation = str(rng.choice(["indexed", "free"]))
            spec = make_spec(
                T=T,
                days=days,
                chi=float(rng.uniform(0, 1)),
                gamma=float(rng.choice([0.0, 0.1, 0.25, 0.6])),
                alpha=float(rng.uniform(0.5, 0.97)),
                pb_max=float(rng.choice([0.0, 20.0, 80.0])),
                ppa_max=float(rng.choice([0.0, 20.0, 80.0])),
                pb_price=float(rng.uniform(3, 15)),
                ppa_price=float(rng.uniform(3, 15)),
                regulation=regulation,
                baseline=rng.uniform(80, 300, T),
                seed=trial,
            )
            scen = ScenSet(
                rng.uniform(5, 25, (n_scen, T)),
                rng.uniform(0, 1, (n_scen, T)),
                -rng.uniform(0.5, 4.0, n_scen),
                probabilities=rng.dirichlet(np.ones(n_scen)),
            )
            sol = solve_stochastic(spec, scen)
            assert validate_solution(sol, spec, scen, feas_tol=1e-7) == [], f"trial {trial}"
            assert np.isfinite(sol.objective)

    def test_wait_and_see_upper_bound(self):
        # the stochastic optimum's expected profit can never beat the average
        # of the per-scenario deterministic optima
        rng = np.random.default_rng(88)
        for trial in range(10):
            spec = make_spec(T=48, chi=0.0, seed=trial + 500)
            scen = make_set(T=48, n_scen=5, seed=trial + 500)
            here_and_now = solve_stochastic(spec, scen).expected_profit
            wait_and_see = sum(
                float(scen.probabilities[w])
                * solve_deterministic(spec, scen.single(w)).profits[0]
                for w in range(5)
            )
            assert here_and_now <= wait_and_see + 1e-6 * max(1.0, abs(wait_and_see))


class TestSpecValidation:
    def test_bad_chi(self):
        with pytest.raises(InvalidConfigError):
            make_spec(T=48, chi=1.5)

    def test_bad_alpha(self):
        with pytest.raises(InvalidConfigError):
            make_spec(T=48, alpha=1.0)

    def test_day_partition_mismatch(self):
        with pytest.raises(InvalidConfigError):
            make_spec(T=48, days=(24,))
