from __future__ import annotations

import numpy as np
import pytest

from tariff_opt.optimizer.problem import ProblemSpec


class ScenSet:
    """Lightweight scenario-set stand-in for optimizer tests."""

    def __init__(self, pool, availability, beta, probabilities=None):
        self.pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
        self.availability = np.atleast_2d(np.asarray(availability, dtype=np.float64))
        self.beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
        n = self.beta.size
        if probabilities is None:
            probabilities = np.full(n, 1.0 / n)
        self.probabilities = np.asarray(probabilities, dtype=np.float64)

    def single(self, w):
        class _One:
            pool = self.pool[w]
            availability = self.availability[w]
            beta = float(self.beta[w])
            probability = 1.0

        return _One()


def make_set(T=48, n_scen=4, seed=0, beta_mean=-2.0, beta_spread=0.4, solar=True):
    rng = np.random.default_rng(seed)
    base_pool = 10.0 + 3.0 * np.sin(np.linspace(0, 2 * np.pi * T / 48, T))
    pool = base_pool[None, :] + rng.normal(0.0, 1.5, (n_scen, T)) ** 2
    if solar:
        slot = np.arange(T) % 48
        shape = np.clip(np.sin(np.pi * (slot - 12) / 24.0), 0.0, 1.0)
        avail = np.clip(shape[None, :] * rng.uniform(0.4, 1.0, (n_scen, 1)), 0.0, 1.0)
    else:
        avail = np.clip(rng.uniform(0.0, 1.0, (n_scen, T)), 0.0, 1.0)
    beta = beta_mean - beta_spread * rng.random(n_scen)
    return ScenSet(pool, avail, beta)


def make_spec(T=48, days=None, chi=0.0, gamma=0.25, pb_max=80.0, ppa_max=80.0,
              pb_price=4.6, ppa_price=4.8, alpha=0.9, lambda_e_bar=1.0,
              regulation="indexed", baseline=None, seed=0, **kw):
    if days is None:
        assert T % 48 == 0
        days = (48,) * (T // 48)
    if baseline is None:
        rng = np.random.default_rng(seed + 1000)
        baseline = 200.0 + 50.0 * np.sin(np.linspace(0, 2 * np.pi * T / 48, T)) + rng.normal(0, 5, T)
    return ProblemSpec(
        lambda_e_bar=lambda_e_bar,
        gamma=gamma,
        pb_price=pb_price,
        pb_max=pb_max,
        ppa_price=ppa_price,
        ppa_max=ppa_max,
        alpha=alpha,
        chi=chi,
        baseline_demand=baseline,
        day_slots=days,
        price_regulation=regulation,
        **kw,
    )


@pytest.fixture
def small_set():
    return make_set(T=48, n_scen=4, seed=3)


@pytest.fixture
def small_spec():
    return make_spec(T=48, seed=3)
