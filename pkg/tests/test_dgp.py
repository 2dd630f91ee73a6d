import numpy as np
import pytest
from scipy import integrate, stats

from nafe.dgp import (
    FE_SLOPE_TARGET,
    DgpSpec,
    assemble_outcomes,
    beta0_true,
    beta1_true,
    rank_cdf,
    rank_cdf_degenerate,
    sample,
    sample_baseline,
    sample_multiplicative,
    sample_rank_mixture,
    write_truth_csv,
)
from nafe.estimators import fit_all_units


class TestBaseline:
    def test_noiseless_model_exact(self):
        spec = DgpSpec("baseline", n=30, T=6, rho=0.0, sigma_v=0.0)
        d, truth = sample_baseline(spec, 3)
        want = truth.u[:, None] + truth.u[:, None] ** 2 * d.x[:, :, 1]
        np.testing.assert_array_equal(d.y, want)
        for fit in fit_all_units(d):
            np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-10)

    def test_endogeneity_correlates_xbar_with_u(self):
        spec = DgpSpec("baseline", n=1000, T=10, rho=1.0, sigma_v=1.0)
        d, truth = sample_baseline(spec, 5)
        corr = np.corrcoef(d.x[:, :, 1].mean(axis=1), truth.u)[0, 1]
        assert corr >= 0.2

    def test_shift_keeps_regressor_positive(self):
        spec = DgpSpec("baseline", n=2000, T=50, rho=0.0, sigma_v=1.0, shift=4.0)
        d, _ = sample_baseline(spec, 9)
        assert np.mean(d.x[:, :, 1] > 0) > 0.9999

    def test_determinism_bitwise(self):
        spec = DgpSpec("baseline", n=25, T=7, rho=1.0, sigma_v=0.5)
        d1, t1 = sample_baseline(spec, 42)
        d2, t2 = sample_baseline(spec, 42)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(t1.u, t2.u)

    def test_changing_T_preserves_u(self):
        u_small = sample_baseline(DgpSpec("baseline", n=10, T=3), 8)[1].u
        u_large = sample_baseline(DgpSpec("baseline", n=10, T=50), 8)[1].u
        np.testing.assert_array_equal(u_small, u_large)

    def test_u_strictly_open(self):
        _, truth = sample_baseline(DgpSpec("baseline", n=5000, T=2), 1)
        assert truth.u.min() > 0.0 and truth.u.max() < 1.0

    def test_truth_reconstructs_outcomes_bitwise(self):
        spec = DgpSpec("baseline", n=12, T=5, rho=2.0, sigma_v=0.3)
        d, truth = sample_baseline(spec, 77)
        np.testing.assert_array_equal(assemble_outcomes(spec, d.x[:, :, 1], truth), d.y)

    def test_monotone_in_u_at_nonnegative_x_star(self):
        u = np.linspace(1e-6, 1 - 1e-6, 10001)
        for c in (0.0, 0.5, 4.5, 100.0):
            y = beta0_true(u) + beta1_true(u) * c
            assert np.all(np.diff(y) > 0)


class TestRankCdf:
    def test_symmetry_at_half(self):
        for sv in (0.01, 0.1, 1.0, 10.0):
            assert rank_cdf(0.5, sv) == pytest.approx(0.5, abs=1e-12)

    def test_limits(self):
        assert rank_cdf(-1e6, 0.5) == pytest.approx(0.0, abs=1e-12)
        assert rank_cdf(1e6, 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_against_quadrature_oracle(self):
        for w, sv in [(0.8, 0.1), (0.3, 0.05), (-0.4, 0.7), (1.2, 0.2), (0.55, 2.0)]:
            want, _ = integrate.quad(
                lambda u: stats.norm.cdf((w - u) / sv), 0.0, 1.0, epsabs=1e-13, limit=200
            )
            assert rank_cdf(w, sv) == pytest.approx(want, abs=1e-10)

    def test_vectorized_and_monotone(self):
        w = np.linspace(-1.0, 2.0, 301)
        out = rank_cdf(w, 0.3)
        assert out.shape == w.shape
        assert np.all(np.diff(out) >= 0)

    def test_degenerate_requires_explicit_call(self):
        with pytest.raises(ValueError):
            rank_cdf(0.5, 0.0)
        np.testing.assert_array_equal(
            rank_cdf_degenerate([-0.5, 0.25, 1.5]), [0.0, 0.25, 1.0]
        )


class TestRankMixture:
    def test_marginal_rank_uniform_ks(self):
        # KS on a single cross-section: the 10^4 draws are then iid, which
        # the KS critical value requires (pooling over t would correlate
        # draws through the shared unit rank and inflate the statistic).
        spec = DgpSpec("rank_mixture", n=10_000, T=2, rho=0.0, sigma_v=0.5)
        _, truth = sample_rank_mixture(spec, 2)
        for t in range(2):
            ks = stats.kstest(truth.u_it[:, t], "uniform").statistic
            assert ks <= 1.63 / np.sqrt(10_000)

    def test_small_noise_is_rank_persistent(self):
        spec = DgpSpec("rank_mixture", n=300, T=50, rho=0.0, sigma_v=0.01)
        _, truth = sample_rank_mixture(spec, 4)
        within = truth.u_it.var(axis=1, ddof=1).mean()
        between = truth.u_it.mean(axis=1).var(ddof=1)
        assert within / between < 0.1

    def test_large_noise_washes_out_persistence(self):
        spec = DgpSpec("rank_mixture", n=300, T=50, rho=0.0, sigma_v=1.0)
        _, truth = sample_rank_mixture(spec, 4)
        within = truth.u_it.var(axis=1, ddof=1).mean()
        between = truth.u_it.mean(axis=1).var(ddof=1)
        assert within / between > 1.0

    def test_no_additive_error(self):
        spec = DgpSpec("rank_mixture", n=10, T=4, rho=1.0, sigma_v=0.3)
        d, truth = sample_rank_mixture(spec, 6)
        want = truth.u_it + truth.u_it**2 * d.x[:, :, 1]
        np.testing.assert_array_equal(d.y, want)

    def test_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            sample_rank_mixture(DgpSpec("rank_mixture", n=5, T=3, sigma_v=0.0), 1)


class TestMultiplicative:
    def test_rho_zero_reduces_to_baseline(self):
        base_spec = DgpSpec("baseline", n=20, T=6, rho=0.0, sigma_v=0.4)
        mult_spec = DgpSpec("multiplicative", n=20, T=6, rho=0.0, sigma_v=0.4)
        db, tb = sample_baseline(base_spec, 33)
        dm, tm = sample_multiplicative(mult_spec, 33)
        np.testing.assert_array_equal(db.y, dm.y)
        np.testing.assert_array_equal(db.x, dm.x)
        np.testing.assert_array_equal(tb.u, tm.u)

    def test_fe_target_constant(self):
        assert FE_SLOPE_TARGET == pytest.approx(1.0 / 3.0, abs=0)

    def test_regressor_scales_with_rank(self):
        spec = DgpSpec("multiplicative", n=4000, T=8, rho=10.0, sigma_v=0.1)
        d, truth = sample_multiplicative(spec, 12)
        hi = d.x[truth.u > 0.8, :, 1].mean()
        lo = d.x[truth.u < 0.2, :, 1].mean()
        assert hi > 2.0 * lo


class TestPlumbing:
    def test_dispatch_matches_direct_calls(self):
        spec = DgpSpec("baseline", n=6, T=4)
        d1, _ = sample(spec, 3)
        d2, _ = sample_baseline(spec, 3)
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            DgpSpec("weird", n=5, T=3)
        with pytest.raises(ValueError):
            DgpSpec("baseline", n=5, T=1)
        with pytest.raises(ValueError):
            DgpSpec("baseline", n=5, T=3, rho=-1.0)

    def test_truth_functions(self):
        assert beta0_true(0.3) == pytest.approx(0.3)
        assert beta1_true(0.3) == pytest.approx(0.09)

    def test_truth_csv(self, tmp_path):
        _, truth = sample_baseline(DgpSpec("baseline", n=4, T=3), 5)
        out = tmp_path / "truth.csv"
        write_truth_csv(truth, out)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "unit,u"
        assert len(lines) == 5
        assert float(lines[1].split(",")[1]) == truth.u[0]
