"""Exception types shared across the package."""

from __future__ import annotations


class TariffOptError(Exception):
    """Base class for all package errors."""


# data ingestion

class MissingColumnError(TariffOptError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"missing required columns: {', '.join(self.columns)}")


class NonMonotoneTimeError(TariffOptError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"timestamps not strictly increasing at row {row}")


class TimestampGapError(TariffOptError):
    def __init__(self, gaps):
        # gaps: list of (gap_start, gap_end, n_missing)
        self.gaps = list(gaps)
        where = "; ".join(f"{a} -> {b} ({n} slots)" for a, b, n in self.gaps)
        super().__init__(f"missing half-hour slots: {where}")


class RowValidationError(TariffOptError):
    def __init__(self, problems):
        # problems: list of (row_number, message)
        self.problems = list(problems)
        head = "; ".join(f"row {r}: {m}" for r, m in self.problems[:5])
        more = "" if len(self.problems) <= 5 else f" (+{len(self.problems) - 5} more)"
        super().__init__(f"invalid rows: {head}{more}")


class MisalignedSeriesError(TariffOptError):
    pass


class InvalidConfigError(TariffOptError):
    pass


# regression

class InsufficientHistoryError(TariffOptError):
    pass


class DegenerateKnotsError(TariffOptError):
    pass


class RankDeficientError(TariffOptError):
    def __init__(self, columns, condition=None):
        self.columns = list(columns)
        self.condition = condition
        msg = f"design matrix is rank deficient (suspect columns: {', '.join(self.columns)})"
        if condition is not None:
            msg += f", condition number {condition:.3e}"
        super().__init__(msg)


class SchemaMismatchError(TariffOptError):
    pass


# scenarios

class EmptyComparisonSetError(TariffOptError):
    pass


class NoPathInRangeError(TariffOptError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"no historical path within 7 days of {date}")


class LengthMismatchError(TariffOptError):
    pass


class SolverFailureError(TariffOptError):
    def __init__(self, scenario_index, cause):
        self.scenario_index = scenario_index
        self.cause = cause
        super().__init__(f"deterministic solve failed for scenario {scenario_index}: {cause}")


class ZeroBandwidthError(TariffOptError):
    pass


# optimizer

class NonConcaveError(TariffOptError):
    pass


class InfeasibleError(TariffOptError):
    pass


class UnboundedError(TariffOptError):
    pass


class MaxIterationsError(TariffOptError):
    """Raised when the interior-point loop hits its iteration cap.

    Carries the best iterate found so far plus its residuals so callers can
    inspect how close the solve got.
    """

    def __init__(self, iterations, residuals, best=None):
        self.iterations = iterations
        self.residuals = dict(residuals)
        self.best = best
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residuals: {self.residuals})"
        )


class SolutionInvalidError(TariffOptError):
    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"solution failed validation: {head}{more}")


# reporting

class ReportInputError(TariffOptError):
    pass
