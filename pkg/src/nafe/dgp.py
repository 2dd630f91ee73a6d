"""Synthetic panel generators with recorded latent truth.

Three families share the coefficient functions beta0(u) = u and
beta1(u) = u^2 and a regressor built from iid standard normals shifted
right (so the sorting monotonicity holds over essentially all draws):

* baseline:       X = Z + shift + rho*U_i,        Y = U_i + U_i^2 X + V
* rank_mixture:   X as baseline,                  Y = U_it + U_it^2 X
                  with U_it = F(U_i + Vtil_it) the probability-integral
                  transform of the noisy rank (no additive error)
* multiplicative: X = (1 + rho*U_i) * (Z + shift), Y = U_i + U_i^2 X + V

Every draw is a pure function of (spec, seed): the latent heterogeneity,
regressor noise, and idiosyncratic noise live on independent substreams,
so changing T never perturbs the U_i draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import rng as _rng
from .panel import INTERCEPT_NAME, PanelDataset

BASELINE = "baseline"
RANK_MIXTURE = "rank_mixture"
MULTIPLICATIVE = "multiplicative"
FAMILIES = (BASELINE, RANK_MIXTURE, MULTIPLICATIVE)

# Comparison target for the homogeneous-slope FE estimator: the mean of
# the true slope function over the rank distribution, E[U^2] = 1/3.
FE_SLOPE_TARGET = 1.0 / 3.0

_STREAM_U, _STREAM_Z, _STREAM_V = 0, 1, 2


def beta0_true(u):
    """True intercept function of the rank variable."""
    return np.asarray(u, dtype=np.float64)


def beta1_true(u):
    """True slope function of the rank variable."""
    u = np.asarray(u, dtype=np.float64)
    return u * u


@dataclass(frozen=True)
class DgpSpec:
    """Family and parameters of one synthetic design.

    rho scales how strongly the regressor loads on the latent rank
    (endogeneity); sigma_v is the idiosyncratic noise scale (additive for
    baseline/multiplicative, inside the rank for rank_mixture); shift
    recenters the regressor noise so the regressor is almost surely
    positive.
    """

    family: str
    n: int
    T: int
    rho: float = 0.0
    sigma_v: float = 1.0
    shift: float = 4.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1 or self.T < 2:
            raise ValueError("need n >= 1 and T >= 2")
        if self.rho < 0 or self.sigma_v < 0:
            raise ValueError("rho and sigma_v must be nonnegative")


@dataclass(frozen=True)
class DrawTruth:
    """Latent state of one draw, sufficient to reconstruct the outcome.

    u is the per-unit rank (strictly inside (0,1)); v holds the
    idiosyncratic normals (additive noise, or the rank noise Vtil for the
    mixture family); u_it is the per-observation rank F(U_i + Vtil_it)
    for the mixture family, None otherwise.
    """

    u: np.ndarray
    v: np.ndarray
    u_it: np.ndarray | None = None
    beta0: Callable = field(default=beta0_true, repr=False)
    beta1: Callable = field(default=beta1_true, repr=False)


def rank_cdf(w, sigma_v: float):
    """CDF of U + V at w, for U ~ Unif(0,1) independent of V ~ N(0, sigma_v^2).

    Closed form sigma * [G(w/sigma) - G((w-1)/sigma)] with
    G(z) = z*Phi(z) + phi(z), the antiderivative of the normal CDF.
    Accepts scalars or arrays.  For the degenerate sigma_v = 0 limit use
    :func:`rank_cdf_degenerate` explicitly.
    """
    if sigma_v <= 0:
        raise ValueError("sigma_v must be positive; use rank_cdf_degenerate for the limit")
    w = np.asarray(w, dtype=np.float64)
    z_hi = w / sigma_v
    z_lo = (w - 1.0) / sigma_v

    def g(z):
        return z * stats.norm.cdf(z) + stats.norm.pdf(z)

    out = sigma_v * (g(z_hi) - g(z_lo))
    return np.clip(out, 0.0, 1.0) if out.ndim else float(min(max(out, 0.0), 1.0))


def rank_cdf_degenerate(w):
    """sigma_v -> 0 limit of :func:`rank_cdf`: clamp of w to [0, 1]."""
    return np.clip(np.asarray(w, dtype=np.float64), 0.0, 1.0)


def _streams(seed: int):
    u = _rng.substream(seed, _rng.NS_DGP, _STREAM_U)
    z = _rng.substream(seed, _rng.NS_DGP, _STREAM_Z)
    v = _rng.substream(seed, _rng.NS_DGP, _STREAM_V)
    return u, z, v


def _as_panel(spec: DgpSpec, x1: np.ndarray, y: np.ndarray) -> PanelDataset:
    n, T = spec.n, spec.T
    x = np.empty((n, T, 2))
    x[:, :, 0] = 1.0
    x[:, :, 1] = x1
    return PanelDataset(
        n=n,
        T=T,
        unit_ids=list(range(n)),
        time_ids=list(range(T)),
        y=y,
        x=x,
        regressor_names=[INTERCEPT_NAME, "x1"],
        has_intercept_column=True,
    )


def assemble_outcomes(spec: DgpSpec, x1: np.ndarray, truth: DrawTruth) -> np.ndarray:
    """Recompute the outcome matrix from regressors and recorded truth.

    The samplers build Y through this same function, so reconstruction
    from (x, truth) is bitwise identical to the emitted panel.
    """
    if spec.family == RANK_MIXTURE:
        u = truth.u_it
        return truth.beta0(u) + truth.beta1(u) * x1
    u = truth.u[:, None]
    return truth.beta0(u) + truth.beta1(u) * x1 + spec.sigma_v * truth.v


def sample_baseline(spec: DgpSpec, seed: int) -> tuple[PanelDataset, DrawTruth]:
    """Draw from the baseline family."""
    if spec.family != BASELINE:
        raise ValueError(f"spec.family is {spec.family!r}, expected {BASELINE!r}")
    rng_u, rng_z, rng_v = _streams(seed)
    u = _rng.open_uniform(rng_u, spec.n)
    z = rng_z.standard_normal((spec.n, spec.T))
    v = rng_v.standard_normal((spec.n, spec.T))
    x1 = z + spec.shift + spec.rho * u[:, None]
    truth = DrawTruth(u=u, v=v)
    y = assemble_outcomes(spec, x1, truth)
    return _as_panel(spec, x1, y), truth


def sample_rank_mixture(spec: DgpSpec, seed: int) -> tuple[PanelDataset, DrawTruth]:
    """Draw from the noisy-rank mixture family.

    The per-observation rank U_it = F(U_i + Vtil_it) is uniform on (0,1)
    marginally (probability integral transform); sigma_v controls whether
    the time-stable component U_i or the time-iid noise dominates it.
    """
    if spec.family != RANK_MIXTURE:
        raise ValueError(f"spec.family is {spec.family!r}, expected {RANK_MIXTURE!r}")
    if spec.sigma_v <= 0:
        raise ValueError("rank_mixture requires sigma_v > 0")
    rng_u, rng_z, rng_v = _streams(seed)
    u = _rng.open_uniform(rng_u, spec.n)
    z = rng_z.standard_normal((spec.n, spec.T))
    vtil = rng_v.standard_normal((spec.n, spec.T))
    x1 = z + spec.shift + spec.rho * u[:, None]
    u_it = rank_cdf(u[:, None] + spec.sigma_v * vtil, spec.sigma_v)
    truth = DrawTruth(u=u, v=vtil, u_it=u_it)
    y = assemble_outcomes(spec, x1, truth)
    return _as_panel(spec, x1, y), truth


def sample_multiplicative(spec: DgpSpec, seed: int) -> tuple[PanelDataset, DrawTruth]:
    """Draw from the multiplicative-endogeneity family.

    The latent rank scales the whole regressor, (1 + rho*U_i)*(Z + shift),
    which biases the homogeneous-FE slope away from its E[U^2] = 1/3
    target as rho grows.
    """
    if spec.family != MULTIPLICATIVE:
        raise ValueError(f"spec.family is {spec.family!r}, expected {MULTIPLICATIVE!r}")
    rng_u, rng_z, rng_v = _streams(seed)
    u = _rng.open_uniform(rng_u, spec.n)
    z = rng_z.standard_normal((spec.n, spec.T))
    v = rng_v.standard_normal((spec.n, spec.T))
    x1 = (1.0 + spec.rho * u[:, None]) * (z + spec.shift)
    truth = DrawTruth(u=u, v=v)
    y = assemble_outcomes(spec, x1, truth)
    return _as_panel(spec, x1, y), truth


_SAMPLERS = {
    BASELINE: sample_baseline,
    RANK_MIXTURE: sample_rank_mixture,
    MULTIPLICATIVE: sample_multiplicative,
}


def sample(spec: DgpSpec, seed: int) -> tuple[PanelDataset, DrawTruth]:
    """Dispatch to the family's sampler."""
    return _SAMPLERS[spec.family](spec, seed)


def write_truth_csv(truth: DrawTruth, path) -> None:
    """Side CSV of the latent per-unit ranks, for oracle tests."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("unit,u\n")
        for i, ui in enumerate(truth.u):
            fh.write(f"{i},{float(ui)!r}\n")
