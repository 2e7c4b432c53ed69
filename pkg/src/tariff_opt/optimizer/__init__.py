"""Risk-averse two-stage tariff and contract optimization."""

from .problem import (
    FirstStage,
    ProblemSpec,
    TariffSolution,
    load_problem_spec,
    profit,
    save_solution,
    load_solution,
    validate_solution,
)
from .deterministic import solve_deterministic
from .stochastic import cvar, cvar_via_ipm, solve_free_price, solve_stochastic

__all__ = [
    "FirstStage",
    "ProblemSpec",
    "TariffSolution",
    "cvar",
    "cvar_via_ipm",
    "load_problem_spec",
    "load_solution",
    "profit",
    "save_solution",
    "solve_deterministic",
    "solve_free_price",
    "solve_stochastic",
    "validate_solution",
]
