"""Balanced-panel container, CSV ingestion, and design diagnostics.

The one ingestion format is long CSV: one header row, one row per
(unit, time) observation, columns ``unit,time,y,x1,...,xK``.  Panels must
be balanced; unbalanced input is rejected rather than imputed.  Unless
disabled, a constant column of ones is prepended to the regressors so the
unit-level intercept is always modeled as an ordinary coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import BalanceError, CsvParseError, SchemaError

# Rule-of-thumb condition-number threshold for a double-precision Gram
# matrix; beyond this the unit-level OLS solution is numerically suspect.
CONDITION_WARN_THRESHOLD = 1e10

INTERCEPT_NAME = "const"


@dataclass(frozen=True)
class PanelDataset:
    """A balanced n x T panel of one outcome and K regressors.

    Attributes
    ----------
    n, T : int
        Number of cross-sectional units and time periods.
    unit_ids, time_ids : list
        Labels in the order used by the array axes.
    y : ndarray, shape (n, T)
        Outcome values.
    x : ndarray, shape (n, T, K)
        Regressor values; ``x[i, t, :]`` is unit i's design row at time t.
    regressor_names : list of str
        K column labels; the first is ``const`` when an intercept column
        is present.
    has_intercept_column : bool
        True when column 0 of ``x`` is identically one.
    """

    n: int
    T: int
    unit_ids: list = field(repr=False)
    time_ids: list = field(repr=False)
    y: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    regressor_names: list
    has_intercept_column: bool

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if y.shape != (self.n, self.T):
            raise ValueError(f"y has shape {y.shape}, expected {(self.n, self.T)}")
        if x.ndim != 3 or x.shape[:2] != (self.n, self.T):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n}, {self.T}, K)")
        if x.shape[2] < 1:
            raise ValueError("need at least one regressor column")
        if len(self.unit_ids) != self.n or len(self.time_ids) != self.T:
            raise ValueError("label lengths do not match (n, T)")
        if len(self.regressor_names) != x.shape[2]:
            raise ValueError("regressor_names length does not match K")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("panel contains non-finite values")
        if self.has_intercept_column and not np.all(x[:, :, 0] == 1.0):
            raise ValueError("has_intercept_column is set but column 0 is not identically 1")
        y.setflags(write=False)
        x.setflags(write=False)

    @property
    def K(self) -> int:
        return self.x.shape[2]


@dataclass(frozen=True)
class ValidationReport:
    """Findings from :func:`validate`; ``ok`` is True iff no error-severity issue."""

    ok: bool
    issues: list  # (severity, unit label or "global", message)

    def errors(self):
        return [i for i in self.issues if i[0] == "error"]

    def __str__(self) -> str:
        if not self.issues:
            return "ok: no issues"
        lines = [f"{sev} [{where}]: {msg}" for sev, where, msg in self.issues]
        return "\n".join(lines)


def load_csv(
    path,
    unit_col: str = "unit",
    time_col: str = "time",
    y_col: str = "y",
    x_cols: Sequence[str] | None = None,
    add_intercept: bool = True,
) -> PanelDataset:
    """Read a long-format CSV into a :class:`PanelDataset`.

    Parameters
    ----------
    path : str or path-like
        CSV file with a header row.
    unit_col, time_col, y_col : str
        Column names for the unit label, time label, and outcome.
    x_cols : sequence of str, optional
        Regressor columns.  Defaults to every column other than
        unit/time/outcome, in file order.
    add_intercept : bool
        Prepend a constant column of ones (default True).

    Raises
    ------
    SchemaError
        A mapped column is missing from the header.
    CsvParseError
        A y/x cell is not numeric; the message carries the file row number.
    BalanceError
        Units observed in differing periods, or duplicated (unit, time).
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    named = [unit_col, time_col, y_col] + (list(x_cols) if x_cols is not None else [])
    missing = [c for c in named if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s) {missing}; file has {list(frame.columns)}")
    if x_cols is None:
        x_cols = [c for c in frame.columns if c not in (unit_col, time_col, y_col)]
        if not x_cols:
            raise SchemaError("no regressor columns found besides unit/time/outcome")

    for col in [y_col, *x_cols]:
        numeric = pd.to_numeric(frame[col], errors="coerce")
        bad = numeric.isna() & frame[col].notna()
        if frame[col].isna().any():
            row = int(frame.index[frame[col].isna()][0]) + 2  # +2: header + 1-based
            raise CsvParseError(f"empty value in column '{col}' at file row {row}", row=row)
        if bad.any():
            row = int(frame.index[bad][0]) + 2
            value = frame[col].iloc[int(frame.index[bad][0])]
            raise CsvParseError(
                f"non-numeric value {value!r} in column '{col}' at file row {row}", row=row
            )
        frame[col] = numeric.astype(np.float64)

    dup = frame.duplicated(subset=[unit_col, time_col])
    if dup.any():
        key = frame.loc[dup.idxmax(), [unit_col, time_col]]
        raise BalanceError(
            f"duplicate (unit, time) pair ({key[unit_col]!r}, {key[time_col]!r})"
        )

    time_ids = sorted(frame[time_col].unique().tolist())
    counts = frame.groupby(unit_col, sort=True).size()
    bad_units = counts.index[counts != len(time_ids)].tolist()
    if bad_units:
        raise BalanceError(
            f"unbalanced panel: unit(s) {bad_units} observed in "
            f"{counts[bad_units].tolist()} period(s), expected {len(time_ids)}"
        )
    # Equal counts are not enough: every unit must cover the same period set.
    period_sets = frame.groupby(unit_col, sort=True)[time_col].agg(frozenset)
    full = frozenset(time_ids)
    bad_units = period_sets.index[period_sets != full].tolist()
    if bad_units:
        raise BalanceError(f"unbalanced panel: unit(s) {bad_units} miss some periods")

    frame = frame.sort_values([unit_col, time_col], kind="stable")
    unit_ids = sorted(frame[unit_col].unique().tolist())
    n, T = len(unit_ids), len(time_ids)
    y = frame[y_col].to_numpy(dtype=np.float64).reshape(n, T)
    x = np.stack(
        [frame[c].to_numpy(dtype=np.float64).reshape(n, T) for c in x_cols], axis=2
    )
    names = list(x_cols)
    if add_intercept:
        x = np.concatenate([np.ones((n, T, 1)), x], axis=2)
        names = [INTERCEPT_NAME] + names
    return PanelDataset(
        n=n,
        T=T,
        unit_ids=unit_ids,
        time_ids=time_ids,
        y=y,
        x=x,
        regressor_names=names,
        has_intercept_column=add_intercept,
    )


def write_csv(d: PanelDataset, path) -> None:
    """Write a panel back to long CSV.

    The auto-prepended intercept column is dropped on output, so
    ``load_csv(write_csv(d))`` with default flags round-trips exactly.
    Floats are written with ``repr``, which is lossless for doubles.
    """
    start = 1 if d.has_intercept_column else 0
    names = d.regressor_names[start:]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["unit", "time", "y", *names]) + "\n")
        for i, unit in enumerate(d.unit_ids):
            for t, time in enumerate(d.time_ids):
                cells = [str(unit), str(time), repr(float(d.y[i, t]))]
                cells += [repr(float(v)) for v in d.x[i, t, start:]]
                fh.write(",".join(cells) + "\n")


def validate(d: PanelDataset) -> ValidationReport:
    """Check per-unit design quality without mutating the panel.

    Errors: fewer periods than regressors (underdetermined unit OLS) and
    per-unit rank deficiency of the T x K regressor block.  Warning: a
    unit Gram matrix with condition number above
    :data:`CONDITION_WARN_THRESHOLD`.
    """
    issues = []
    if d.T < d.K:
        issues.append(("error", "global", f"T={d.T} < K={d.K}: unit regressions are underdetermined"))
        return ValidationReport(ok=False, issues=issues)

    sv = np.linalg.svd(d.x, compute_uv=False)  # (n, K) singular values
    eps = np.finfo(np.float64).eps
    for i, unit in enumerate(d.unit_ids):
        smax, smin = sv[i, 0], sv[i, -1]
        if smin <= max(d.T, d.K) * eps * smax:
            issues.append(("error", unit, "rank-deficient regressor block (perfect collinearity)"))
        else:
            cond2 = (smax / smin) ** 2
            if cond2 > CONDITION_WARN_THRESHOLD:
                issues.append(
                    ("warning", unit, f"near-singular Gram matrix (condition {cond2:.3e})")
                )
    ok = not any(sev == "error" for sev, _, _ in issues)
    return ValidationReport(ok=ok, issues=issues)


def column_means(d: PanelDataset) -> np.ndarray:
    """Pooled regressor mean over all n*T cells; length-K vector.

    This is the default sorting point: the counterfactual regressor value
    at which fitted outcomes are ranked.  Entry 0 is exactly 1 when an
    intercept column is present.
    """
    means = d.x.mean(axis=(0, 1))
    if d.has_intercept_column:
        means[0] = 1.0
    return means
