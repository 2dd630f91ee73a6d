"""Cross-sectional nonparametric bootstrap standard errors.

Units are resampled with replacement as whole (Y_i, X_i) blocks, the
rank-sorted coefficient estimator is recomputed on each resample, and the
standard error is the rescaled interquartile range of the replicate
estimates: SE = (q*_{0.75} - q*_{0.25}) / (z_{0.75} - z_{0.25}), robust to
the occasional wild replicate.

Each replicate owns an independent RNG substream derived from (seed, b),
so results are bitwise identical however replicates are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import rng as _rng
from .errors import BootstrapError, NumericalError
from .estimators import beta_at, coefficient_path, fit_all_units
from .panel import PanelDataset

# Fraction of replicates allowed to fail before the whole run errors out.
MAX_FAILURE_RATE = 0.10


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate estimates and the IQR-rescaled standard errors.

    se has shape (len(taus), K); replicate_estimates has shape
    (B, len(taus), K) with NaN rows for failed replicates.
    """

    B: int
    taus: list
    se: np.ndarray
    replicate_estimates: np.ndarray
    seed: int
    failed_replicates: int = 0

    def to_csv(self, path, coefficient_names: Sequence[str] | None = None) -> None:
        names = (
            list(coefficient_names)
            if coefficient_names is not None
            else [f"b{k}" for k in range(self.se.shape[1])]
        )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tau,coefficient,se,B,seed,failed_replicates\n")
            for j, tau in enumerate(self.taus):
                for k, name in enumerate(names):
                    fh.write(
                        f"{float(tau)!r},{name},{float(self.se[j, k])!r},"
                        f"{self.B},{self.seed},{self.failed_replicates}\n"
                    )


def _resample(d: PanelDataset, rng: np.random.Generator) -> PanelDataset:
    idx = rng.integers(0, d.n, size=d.n)
    return PanelDataset(
        n=d.n,
        T=d.T,
        unit_ids=list(range(d.n)),
        time_ids=list(d.time_ids),
        y=d.y[idx],
        x=d.x[idx],
        regressor_names=list(d.regressor_names),
        has_intercept_column=d.has_intercept_column,
    )


def _nafe_replicate(d: PanelDataset, taus, x_star) -> np.ndarray:
    path = coefficient_path(fit_all_units(d), x_star)
    return np.array([beta_at(path, tau) for tau in taus])


def iqr_se(replicates: np.ndarray) -> np.ndarray:
    """IQR-rescaled SE over axis 0, ignoring NaN (failed) rows.

    Sample quantiles use linear interpolation between order statistics
    (the common "type 7" definition); the denominator is
    2 * Phi^{-1}(0.75) ~= 1.3489795.
    """
    ok = ~np.isnan(replicates).any(axis=tuple(range(1, replicates.ndim)))
    kept = replicates[ok]
    if kept.shape[0] < 2:
        raise BootstrapError("fewer than 2 successful replicates")
    q25, q75 = np.quantile(kept, [0.25, 0.75], axis=0)
    denom = stats.norm.ppf(0.75) - stats.norm.ppf(0.25)
    return (q75 - q25) / denom


def bootstrap_replicates(
    d: PanelDataset,
    estimate_fn: Callable[[PanelDataset], np.ndarray],
    B: int,
    seed: int,
    threads: int = 1,
) -> tuple[np.ndarray, int]:
    """Run B unit-block resamples of `estimate_fn`; NaN rows mark failures.

    Returns (replicates, n_failed).  Raises BootstrapError when more than
    MAX_FAILURE_RATE of the replicates fail.
    """
    if B < 2:
        raise ValueError("B must be at least 2")

    def one(b: int) -> np.ndarray:
        rng = _rng.substream(seed, _rng.NS_BOOTSTRAP, b)
        try:
            return np.asarray(estimate_fn(_resample(d, rng)), dtype=np.float64)
        except NumericalError:
            return np.full(shape, np.nan)

    shape = np.asarray(estimate_fn(d), dtype=np.float64).shape
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(B)))
    else:
        rows = [one(b) for b in range(B)]
    replicates = np.stack(rows)
    n_failed = int(np.isnan(replicates).any(axis=tuple(range(1, replicates.ndim))).sum())
    if n_failed > MAX_FAILURE_RATE * B:
        raise BootstrapError(
            f"{n_failed}/{B} bootstrap replicates failed "
            f"(more than {MAX_FAILURE_RATE:.0%}); data may be near-singular"
        )
    return replicates, n_failed


def bootstrap_se(
    d: PanelDataset,
    taus: Sequence[float],
    x_star: np.ndarray,
    B: int,
    seed: int,
    threads: int = 1,
) -> BootstrapResult:
    """Bootstrap SEs of the rank-sorted coefficient estimator.

    Parameters
    ----------
    d : PanelDataset
    taus : rank levels, each in (0, 1)
    x_star : sorting point, length K
    B : number of bootstrap replicates (>= 2)
    seed : base seed for the replicate substreams
    threads : worker threads; has no effect on the result values
    """
    taus = [float(t) for t in taus]
    if not all(0.0 < t < 1.0 for t in taus):
        raise ValueError("every tau must lie in (0, 1)")
    replicates, n_failed = bootstrap_replicates(
        d, lambda dd: _nafe_replicate(dd, taus, x_star), B, seed, threads=threads
    )
    return BootstrapResult(
        B=B,
        taus=taus,
        se=iqr_se(replicates),
        replicate_estimates=replicates,
        seed=seed,
        failed_replicates=n_failed,
    )
