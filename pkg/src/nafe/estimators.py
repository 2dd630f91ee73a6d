"""Rank-sorted heterogeneous-coefficient estimation and baselines.

The main estimator proceeds in four steps: (1) per-unit time-series OLS,
(2) fitted counterfactual outcomes at a sorting point x*, (3) a sorting
permutation of those outcomes, (4) coefficient extraction at rank tau via
ceiling indexing into the sorted units.  Baselines: the within (demeaned)
fixed-effects estimator and a two-step fixed-effects quantile regression
(demean by estimated unit effects, then pooled check-loss minimization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import SingularDesignError
from .panel import PanelDataset
from .qr import QrProblem, qr_fit


@dataclass(frozen=True)
class UnitFit:
    """One unit's time-series OLS fit.

    unit_index is 0-based.  beta_hat solves the unit's normal equations;
    residuals = Y_i - X_i beta_hat; gram_condition is cond(X_i'X_i).
    """

    unit_index: int
    beta_hat: np.ndarray
    residuals: np.ndarray
    gram_condition: float


@dataclass(frozen=True)
class RankedPath:
    """Sorted counterfactual outcomes and the coefficient step function.

    sigma_hat : ndarray of int, shape (n,)
        Permutation (0-based): sigma_hat[k] is the unit whose fitted
        counterfactual outcome is the (k+1)-th smallest.
    sorted_beta : ndarray, shape (n, K)
        Row k holds beta_hat of unit sigma_hat[k].
    x_star : ndarray, shape (K,)
        The sorting point.
    sorted_counterfactual : ndarray, shape (n,)
        Nondecreasing; entry k equals x_star . sorted_beta[k].
    """

    sigma_hat: np.ndarray
    sorted_beta: np.ndarray
    x_star: np.ndarray
    sorted_counterfactual: np.ndarray

    @property
    def n(self) -> int:
        return self.sigma_hat.shape[0]


class WithinFeFit(NamedTuple):
    beta_fe: np.ndarray  # (K-1,) slopes of the non-intercept regressors
    alpha_hat: np.ndarray  # (n,) recovered unit effects


def _ts_ols_batch(x: np.ndarray, y: np.ndarray):
    """Vectorized per-unit OLS over a stack of designs.

    Parameters
    ----------
    x : ndarray, shape (n, T, K)
    y : ndarray, shape (n, T)

    Returns
    -------
    beta : (n, K), residuals : (n, T), gram_condition : (n,),
    singular : (n,) bool mask of rank-deficient units.

    Uses a thin QR factorization of each X_i (not explicit Gram
    inversion), so conditioning is governed by cond(X_i) rather than its
    square.
    """
    n, T, K = x.shape
    if T < K:
        raise SingularDesignError(f"T={T} < K={K}: unit designs are underdetermined")
    q, r = np.linalg.qr(x)  # q: (n, T, K), r: (n, K, K)
    diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
    singular = diag.min(axis=1) <= K * np.finfo(np.float64).eps * diag.max(axis=1)

    rhs = np.einsum("ntk,nt->nk", q, y)
    r_solve = r.copy()
    # Patch singular blocks with the identity so the batched solve runs;
    # flagged rows are discarded by the caller.
    if singular.any():
        r_solve[singular] = np.eye(K)
    beta = np.linalg.solve(r_solve, rhs[:, :, None])[:, :, 0]
    residuals = y - np.einsum("ntk,nk->nt", x, beta)

    sv = np.linalg.svd(x, compute_uv=False)
    with np.errstate(divide="ignore", over="ignore"):
        gram_condition = (sv[:, 0] / sv[:, -1]) ** 2
    return beta, residuals, gram_condition, singular


def ts_ols_unit(X_i: np.ndarray, Y_i: np.ndarray, unit=None) -> UnitFit:
    """Time-series OLS for one unit.

    Parameters
    ----------
    X_i : ndarray, shape (T, K), full column rank with T >= K
    Y_i : ndarray, shape (T,)
    unit : optional label used in error messages.

    Raises
    ------
    SingularDesignError
        If X_i is rank deficient (or T < K).
    """
    X_i = np.asarray(X_i, dtype=np.float64)
    Y_i = np.asarray(Y_i, dtype=np.float64)
    beta, resid, cond, singular = _ts_ols_batch(X_i[None], Y_i[None])
    if singular[0]:
        raise SingularDesignError(
            f"rank-deficient design for unit {unit!r}" if unit is not None
            else "rank-deficient design",
            unit=unit,
        )
    return UnitFit(unit_index=0, beta_hat=beta[0], residuals=resid[0], gram_condition=float(cond[0]))


def fit_all_units(d: PanelDataset) -> list[UnitFit]:
    """Per-unit OLS for every unit, in unit order."""
    beta, resid, cond, singular = _ts_ols_batch(d.x, d.y)
    if singular.any():
        bad = [d.unit_ids[i] for i in np.flatnonzero(singular)]
        raise SingularDesignError(f"rank-deficient design for unit(s) {bad}", unit=bad[0])
    return [
        UnitFit(unit_index=i, beta_hat=beta[i], residuals=resid[i], gram_condition=float(cond[i]))
        for i in range(d.n)
    ]


def _beta_matrix(fits: Sequence[UnitFit]) -> np.ndarray:
    return np.array([f.beta_hat for f in fits], dtype=np.float64)


def counterfactual_outcomes(fits: Sequence[UnitFit], x_star: np.ndarray) -> np.ndarray:
    """Fitted outcomes x_star . beta_hat_i for every unit."""
    beta = _beta_matrix(fits)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != (beta.shape[1],):
        raise ValueError(f"x_star has shape {x_star.shape}, expected ({beta.shape[1]},)")
    return beta @ x_star


def rank_permutation(y_star: np.ndarray) -> np.ndarray:
    """0-based sorting permutation of the fitted outcomes.

    Entry k is the index of the (k+1)-th smallest value; ties are broken
    by ascending original index (stable sort) so results are reproducible.
    """
    y_star = np.asarray(y_star, dtype=np.float64)
    return np.argsort(y_star, kind="stable")


def coefficient_path(fits: Sequence[UnitFit], x_star: np.ndarray) -> RankedPath:
    """Compose fitted outcomes and the sorting permutation into a path."""
    beta = _beta_matrix(fits)
    y_star = counterfactual_outcomes(fits, x_star)
    sigma = rank_permutation(y_star)
    return RankedPath(
        sigma_hat=sigma,
        sorted_beta=beta[sigma],
        x_star=np.asarray(x_star, dtype=np.float64),
        sorted_counterfactual=y_star[sigma],
    )


def ceil_rank_index(n: int, tau: float) -> int:
    """0-based row index ceil(n*tau) - 1.

    The ceiling is taken on the exact rational product of n and the
    binary float tau, not on the rounded double n*tau: e.g. for n=10,
    tau=0.3 the float product is 3.0000000000000004 while the exact
    product is just below 3, so the index must come from ceil of the
    latter.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau={tau} outside (0, 1)")
    return math.ceil(Fraction(tau) * n) - 1


def beta_at(path: RankedPath, tau: float) -> np.ndarray:
    """Coefficient vector at rank tau: sorted_beta row ceil(n*tau).

    Constant in tau on each interval ((k-1)/n, k/n].
    """
    return path.sorted_beta[ceil_rank_index(path.n, tau)]


def within_fe(d: PanelDataset) -> WithinFeFit:
    """Standard fixed-effects (within) estimator.

    Pooled OLS on unit-demeaned data gives the homogeneous slopes of the
    non-intercept regressors; unit effects are recovered as
    alpha_i = ybar_i - xbar_i . beta_fe.

    Raises
    ------
    SingularDesignError
        If the demeaned pooled design is rank deficient (e.g. a
        time-invariant regressor).
    """
    if not d.has_intercept_column:
        raise ValueError("within_fe requires an intercept column")
    xs = d.x[:, :, 1:]  # (n, T, K-1)
    xbar = xs.mean(axis=1)  # (n, K-1)
    ybar = d.y.mean(axis=1)  # (n,)
    xd = (xs - xbar[:, None, :]).reshape(d.n * d.T, -1)
    yd = (d.y - ybar[:, None]).ravel()

    q, r = np.linalg.qr(xd)
    diag = np.abs(np.diag(r))
    if diag.min() <= max(xd.shape) * np.finfo(np.float64).eps * diag.max():
        raise SingularDesignError("demeaned pooled design is rank deficient")
    beta_fe = np.linalg.solve(r, q.T @ yd)
    alpha_hat = ybar - xbar @ beta_fe
    return WithinFeFit(beta_fe=beta_fe, alpha_hat=alpha_hat)


def canay_feqr(d: PanelDataset, tau: float, tol: float = 1e-8, max_iter: int = 500) -> np.ndarray:
    """Two-step fixed-effects quantile regression at rank tau.

    Step 1: unit effects alpha_i as time means of Y_it - X_it . beta_fe
    with beta_fe from :func:`within_fe`.  Step 2: pooled quantile
    regression of (Y_it - alpha_i) on (1, X_it) at tau.  Returns the
    non-intercept coefficients (length K-1).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau={tau} outside (0, 1)")
    fe = within_fe(d)
    xs = d.x[:, :, 1:]
    alpha = (d.y - np.einsum("ntk,k->nt", xs, fe.beta_fe)).mean(axis=1)
    y_net = (d.y - alpha[:, None]).ravel()
    design = np.concatenate(
        [np.ones((d.n * d.T, 1)), xs.reshape(d.n * d.T, -1)], axis=1
    )
    prob = QrProblem(design=design, response=y_net, tau=tau, tol=tol, max_iter=max_iter)
    return qr_fit(prob)[1:]


def pointwise_asy_variance(
    path: RankedPath, k: int, tau: float, h: float | None = None
) -> float:
    """Plug-in large-n variance of the coefficient estimator at rank tau.

    The limiting variance is tau*(1-tau) * beta_k'(tau)^2 / n; the
    derivative is estimated by the central finite difference of the
    estimated step function.  Default bandwidth n^(-1/5), clamped so that
    tau +/- h stays inside (0.01, 0.99).

    Raises
    ------
    ValueError
        If an explicit bandwidth places tau +/- h outside (0, 1), or tau
        leaves no room for the clamped default.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau={tau} outside (0, 1)")
    n = path.n
    if h is None:
        h = min(n ** (-0.2), tau - 0.01, 0.99 - tau)
        if h <= 0:
            raise ValueError(f"tau={tau} too extreme for the default bandwidth")
    if tau - h <= 0.0 or tau + h >= 1.0:
        raise ValueError(f"bandwidth h={h} places tau +/- h outside (0, 1)")
    hi = beta_at(path, tau + h)[k]
    lo = beta_at(path, tau - h)[k]
    deriv = (hi - lo) / (2.0 * h)
    return tau * (1.0 - tau) * deriv * deriv / n
