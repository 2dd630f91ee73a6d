import numpy as np
import pytest

from nafe.panel import INTERCEPT_NAME, PanelDataset


def panel_from_arrays(y, x1, add_intercept=True, unit_ids=None, time_ids=None):
    """Build a 2-regressor PanelDataset (intercept + x1) from raw arrays."""
    y = np.asarray(y, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    n, T = y.shape
    if add_intercept:
        x = np.empty((n, T, 2))
        x[:, :, 0] = 1.0
        x[:, :, 1] = x1
        names = [INTERCEPT_NAME, "x1"]
    else:
        x = x1[:, :, None]
        names = ["x1"]
    return PanelDataset(
        n=n,
        T=T,
        unit_ids=unit_ids if unit_ids is not None else list(range(n)),
        time_ids=time_ids if time_ids is not None else list(range(T)),
        y=y,
        x=x,
        regressor_names=names,
        has_intercept_column=add_intercept,
    )


def location_shift_panel(seed, n=100, T=20, slope=2.0, noise_sd=1.0):
    """Additive fixed-effects design Y = alpha_i + slope*x + e."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.0, n)
    x1 = rng.normal(4.0, 1.0, (n, T))
    y = alpha[:, None] + slope * x1 + noise_sd * rng.normal(0.0, 1.0, (n, T))
    return panel_from_arrays(y, x1)


@pytest.fixture
def tmp_csv(tmp_path):
    def _write(text, name="panel.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
