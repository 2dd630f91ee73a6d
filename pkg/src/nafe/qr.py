"""Check-loss (quantile regression) minimization.

Solves min_b sum_i rho_tau(y_i - x_i'b) with rho_tau(u) = u*(tau - 1{u<0}).
The algorithm is iteratively reweighted least squares on a smoothed
absolute value with a decreasing smoothing parameter, followed by a polish
step that enumerates exact-fit basic solutions near the iterate; a
minimizer of this polyhedral convex objective always lies at a basic
solution, so the polish recovers vertex-level accuracy.  The contract is
accuracy of the objective value, not identity of the minimizer (which can
be non-unique when m*tau is an integer).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import QrSolverError

# Polish enumerates exact fits through the (p + _POLISH_EXTRA) observations
# with the smallest smoothed-solution residuals.
_POLISH_EXTRA = 12


@dataclass(frozen=True)
class QrProblem:
    """One pooled quantile-regression problem.

    design : ndarray, shape (m, p), full column rank with m >= p
    response : ndarray, shape (m,)
    tau : quantile level in (0, 1)
    tol : relative objective-change tolerance between iterates
    max_iter : total iteration budget across the smoothing schedule
    """

    design: np.ndarray
    response: np.ndarray
    tau: float
    tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        X = np.asarray(self.design, dtype=np.float64)
        y = np.asarray(self.response, dtype=np.float64)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        m, p = X.shape
        if y.shape != (m,):
            raise ValueError(f"response has shape {y.shape}, expected ({m},)")
        if m < p:
            raise ValueError(f"m={m} < p={p}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau={self.tau} outside (0, 1)")
        if self.tol <= 0 or self.max_iter <= 0:
            raise ValueError("tol and max_iter must be positive")


def check_loss(b: np.ndarray, prob: QrProblem) -> float:
    """Objective sum_i rho_tau(y_i - x_i'b)."""
    r = prob.response - prob.design @ np.asarray(b, dtype=np.float64)
    return float(np.sum(r * (prob.tau - (r < 0))))


def _weighted_ls(X, y, w):
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return beta


def qr_fit(prob: QrProblem) -> np.ndarray:
    """Minimize the check loss; returns a coefficient vector of length p.

    Raises
    ------
    QrSolverError
        If the iteration budget is exhausted before the objective
        stabilizes; the exception carries the best iterate and a bound on
        the remaining gap.
    """
    X, y, tau = prob.design, prob.response, prob.tau
    m, p = X.shape

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    best_beta, best_obj = beta, check_loss(beta, prob)

    scale = float(np.max(np.abs(r))) if np.any(r) else 0.0
    if scale == 0.0:  # OLS already interpolates: loss 0 is the global minimum
        return beta

    eps = 0.1 * scale
    eps_min = 1e-12 * scale
    iters = 0
    round_cap = max(10, prob.max_iter // 7)  # 7 rounds: eps 1e-1 s .. 1e-13 s
    converged = False
    while not converged:
        obj_prev = np.inf
        for _ in range(round_cap):
            if iters >= prob.max_iter:
                raise QrSolverError(
                    f"no convergence after {prob.max_iter} iterations",
                    best_beta=best_beta,
                    best_objective=best_obj,
                    gap_estimate=eps * m * max(tau, 1.0 - tau),
                )
            iters += 1
            asym = np.where(r >= 0, tau, 1.0 - tau)
            w = asym / np.sqrt(r * r + eps * eps)
            beta = _weighted_ls(X, y, w)
            r = y - X @ beta
            obj = check_loss(beta, prob)
            if obj < best_obj:
                best_beta, best_obj = beta, obj
            if abs(obj_prev - obj) <= prob.tol * (1.0 + abs(obj)):
                break
            obj_prev = obj
        if eps <= eps_min:
            converged = True
        eps *= 0.01

    # Polish: the optimum sits at a basic solution (p residuals exactly
    # zero); enumerate exact fits through the observations nearest the
    # smoothed iterate and keep whichever solution has the lowest loss.
    r_best = y - X @ best_beta
    order = np.argsort(np.abs(r_best), kind="stable")
    cand = order[: min(m, p + _POLISH_EXTRA)]
    for subset in combinations(cand.tolist(), p):
        idx = sorted(subset)  # ascending rows: bit-identical to enumeration
        bs = _exact_fit(X[idx], y[idx])
        if bs is None:
            continue
        obj = check_loss(bs, prob)
        if obj < best_obj:
            best_beta, best_obj = bs, obj
    return best_beta


def _exact_fit(Xs, ys):
    """Solve the square exact-fit system; None if singular or non-finite.

    Ill-conditioned subsets are allowed through: their objective value
    decides whether they win, so a garbage solve is never selected.
    """
    try:
        bs = np.linalg.solve(Xs, ys)
    except np.linalg.LinAlgError:
        return None
    return bs if np.all(np.isfinite(bs)) else None


def enumerate_basic_solutions(prob: QrProblem) -> tuple[np.ndarray, float]:
    """Global minimum by exhaustive basic-solution enumeration.

    Solves every full-rank size-p subset exactly and returns the best
    (coefficients, objective).  Exponential in p; intended as a test
    oracle for small instances, not for production fitting.
    """
    X, y = prob.design, prob.response
    m, p = X.shape
    best_beta, best_obj = None, np.inf
    for subset in combinations(range(m), p):
        bs = _exact_fit(X[list(subset)], y[list(subset)])
        if bs is None:
            continue
        obj = check_loss(bs, prob)
        if obj < best_obj:
            best_beta, best_obj = bs, obj
    if best_beta is None:
        raise ValueError("no full-rank subset of size p")
    return best_beta, best_obj
