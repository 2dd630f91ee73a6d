"""Exception hierarchy shared across the package.

Data problems (malformed or unbalanced input) and numerical failures
(singular designs, non-converged solves) are kept on separate branches so
the CLI can map them to distinct exit codes.
"""

from __future__ import annotations


class NafeError(Exception):
    """Base class for all package-specific errors."""


class PanelDataError(NafeError):
    """A problem with input data (schema, balance, parsing, validation)."""


class SchemaError(PanelDataError):
    """A required column is missing or the header is malformed."""


class BalanceError(PanelDataError):
    """The panel is not balanced, or a (unit, time) key is duplicated."""


class CsvParseError(PanelDataError):
    """A cell could not be parsed as a number; carries the offending row."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class NumericalError(NafeError):
    """A numerical procedure failed (rank deficiency, non-convergence)."""


class SingularDesignError(NumericalError):
    """A unit's time-series design matrix is rank deficient."""

    def __init__(self, message: str, unit=None):
        super().__init__(message)
        self.unit = unit


class QrSolverError(NumericalError):
    """Check-loss minimization did not converge within the iteration budget.

    Carries the best iterate found and an upper bound on the remaining
    objective gap so callers can decide whether the iterate is usable.
    """

    def __init__(self, message: str, best_beta=None, best_objective=None, gap_estimate=None):
        super().__init__(message)
        self.best_beta = best_beta
        self.best_objective = best_objective
        self.gap_estimate = gap_estimate


class BootstrapError(NumericalError):
    """Too many bootstrap replicates failed to produce an estimate."""
