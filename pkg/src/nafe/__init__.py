"""Heterogeneous panel coefficients recovered by rank-sorting counterfactual outcomes.

Core pipeline: per-unit time-series OLS, fitted outcomes at a sorting
point, a sorting permutation, and rank-indexed coefficient extraction.
Baselines (within FE, two-step FE quantile regression), a unit-block
bootstrap for standard errors, synthetic data generators with recorded
truth, and a deterministic Monte Carlo harness round out the package.
"""

__version__ = "0.1.0"

from .bootstrap import BootstrapResult, bootstrap_se, iqr_se
from .dgp import (
    BASELINE,
    FE_SLOPE_TARGET,
    MULTIPLICATIVE,
    RANK_MIXTURE,
    DgpSpec,
    DrawTruth,
    rank_cdf,
    sample,
    sample_baseline,
    sample_multiplicative,
    sample_rank_mixture,
)
from .errors import (
    BalanceError,
    BootstrapError,
    CsvParseError,
    NafeError,
    NumericalError,
    PanelDataError,
    QrSolverError,
    SchemaError,
    SingularDesignError,
)
from .estimators import (
    RankedPath,
    UnitFit,
    WithinFeFit,
    beta_at,
    canay_feqr,
    coefficient_path,
    counterfactual_outcomes,
    fit_all_units,
    pointwise_asy_variance,
    rank_permutation,
    ts_ols_unit,
    within_fe,
)
from .mc import (
    McCell,
    McConfig,
    McResult,
    identification_probe,
    permutation_recovery_probe,
    rate_to_T,
    run_mc,
    spacing_bound_probe,
)
from .panel import (
    PanelDataset,
    ValidationReport,
    column_means,
    load_csv,
    validate,
    write_csv,
)
from .qr import QrProblem, check_loss, enumerate_basic_solutions, qr_fit

__all__ = [name for name in dir() if not name.startswith("_")]
