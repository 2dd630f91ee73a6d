"""Built-in synthetic demo panel.

A stand-in for a country-level application sample (45 units observed
1988-2003): a noiseless additive fixed-effects design with slope exactly
2, so the within estimator recovers 2 to the bit and the rank-sorted
estimator's intercept path reproduces the unit effects.
"""

from __future__ import annotations

import numpy as np

from . import rng as _rng
from .panel import INTERCEPT_NAME, PanelDataset

DEMO_SLOPE = 2.0
_DEMO_SEED = 1988


def make_demo_panel(n: int = 45, first_year: int = 1988, last_year: int = 2003) -> PanelDataset:
    """Deterministic demo panel: Y_it = alpha_i + 2 * x1_it, no noise."""
    T = last_year - first_year + 1
    rng_a = _rng.substream(_DEMO_SEED, _rng.NS_DGP, 10)
    rng_x = _rng.substream(_DEMO_SEED, _rng.NS_DGP, 11)
    alpha = rng_a.normal(loc=0.0, scale=1.0, size=n)
    x1 = rng_x.normal(loc=2.0, scale=1.0, size=(n, T))
    y = alpha[:, None] + DEMO_SLOPE * x1
    x = np.empty((n, T, 2))
    x[:, :, 0] = 1.0
    x[:, :, 1] = x1
    return PanelDataset(
        n=n,
        T=T,
        unit_ids=[f"C{i + 1:02d}" for i in range(n)],
        time_ids=list(range(first_year, last_year + 1)),
        y=y,
        x=x,
        regressor_names=[INTERCEPT_NAME, "x1"],
        has_intercept_column=True,
    )
