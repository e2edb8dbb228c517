"""
VAR estimation, Granger factors and Yule-Walker.

Known values:
- F = ln 2 when the restricted variance is twice the full one
- y1[n] = 0.9 y2[n-1] + 0.1 e: forward F ~ ln(82), reverse F ~ 0
- yule_walker_ar2(0.5, 0.3) = (0.4667, 0.0667)
"""
import numpy as np
import pytest

from models.var_model import (
    KalmanConfig,
    VarModel,
    fit_var_kalman,
    fit_var_ols,
    granger_statistic,
    granger_table,
    lagged_design,
    pairwise_granger,
    residuals,
    yule_walker,
    yule_walker_ar2,
)
from utils.exceptions import (
    DegenerateCorrelationError,
    DimensionMismatchError,
    InsufficientDataError,
    InvalidParameterError,
    SelfPairError,
    SingularRegressorsError,
    UnknownChannelError,
)
from utils.timeseries import MultichannelSeries, autocorrelation

TRUE_M1 = np.array([[0.5, 0.2], [-0.3, 0.4]])


def simulate_var1(m, n, seed=0, noise_std=1.0):
    rng = np.random.default_rng(seed)
    c = m.shape[0]
    y = np.zeros((c, n))
    e = rng.standard_normal((c, n)) * noise_std
    for t in range(1, n):
        y[:, t] = m @ y[:, t - 1] + e[:, t]
    return MultichannelSeries(tuple(f"y{i + 1}" for i in range(c)), y)


def simulate_ar2(s1, s2, n, seed=0):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    y = np.zeros(n)
    for t in range(2, n):
        y[t] = s1 * y[t - 1] + s2 * y[t - 2] + e[t]
    return MultichannelSeries(("y",), y)


class TestLaggedDesign:

    def test_blocks_hold_lagged_values(self):
        data = np.array([[1.0, 2.0, 3.0, 4.0], [10.0, 20.0, 30.0, 40.0]])
        z, y = lagged_design(data, 2)
        assert z.shape == (2, 4)
        np.testing.assert_array_equal(y, [[3, 30], [4, 40]])
        # Block 1 is y_{t-1}, block 2 is y_{t-2}
        np.testing.assert_array_equal(z[0], [2, 20, 1, 10])
        np.testing.assert_array_equal(z[1], [3, 30, 2, 20])


class TestFitVarOls:

    def test_recovers_known_var1(self):
        model = fit_var_ols(simulate_var1(TRUE_M1, 20000), 1)
        assert model.order == 1
        assert model.method == "ols"
        np.testing.assert_allclose(model.lag_matrices[0], TRUE_M1, atol=0.03)
        np.testing.assert_allclose(model.innovation_covariance, np.eye(2), atol=0.05)

    def test_order_three_shape(self):
        model = fit_var_ols(simulate_var1(TRUE_M1, 2000), 3)
        assert model.lag_matrices.shape == (3, 2, 2)
        assert model.samples_used == 1997

    def test_insufficient_data(self):
        series = simulate_var1(TRUE_M1, 5)
        with pytest.raises(InsufficientDataError):
            fit_var_ols(series, 2)

    @pytest.mark.parametrize("n_samples,fits", [(9, False), (10, True)])
    def test_sample_boundary(self, n_samples, fits):
        rng = np.random.default_rng(1)
        series = MultichannelSeries(("a", "b"), rng.standard_normal((2, n_samples)))
        if fits:
            assert fit_var_ols(series, 3).samples_used == n_samples - 3
        else:
            with pytest.raises(InsufficientDataError):
                fit_var_ols(series, 3)

    def test_least_squares_is_local_minimum(self):
        series = simulate_var1(TRUE_M1, 2000, seed=4)
        model = fit_var_ols(series, 2)
        z, y = lagged_design(series.data, 2)

        def rss(lags):
            b = np.vstack([m.T for m in lags])
            return float(np.sum((y - z @ b) ** 2))

        best = rss(model.lag_matrices)
        for index in np.ndindex(model.lag_matrices.shape):
            for step in (-0.01, 0.01):
                moved = np.array(model.lag_matrices)
                moved[index] += step
                assert rss(moved) > best

    def test_innovation_covariance_is_symmetric_psd(self):
        model = fit_var_ols(simulate_var1(TRUE_M1, 3000, seed=5), 2)
        cov = model.innovation_covariance
        np.testing.assert_array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-12

    def test_white_noise_has_no_lag_structure(self):
        rng = np.random.default_rng(6)
        series = MultichannelSeries(("a", "b"), rng.standard_normal((2, 100000)))
        model = fit_var_ols(series, 2)
        assert np.abs(model.lag_matrices).max() < 0.03

    def test_duplicated_channel_is_singular(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(500)
        series = MultichannelSeries(("a", "b"), np.vstack([x, x]))
        with pytest.raises(SingularRegressorsError):
            fit_var_ols(series, 1)

    def test_bad_order(self):
        with pytest.raises(InvalidParameterError):
            fit_var_ols(simulate_var1(TRUE_M1, 100), 0)


class TestFitVarKalman:

    def test_static_filter_matches_ols(self):
        series = simulate_var1(TRUE_M1, 5000, seed=3)
        ols = fit_var_ols(series, 1)
        kalman = fit_var_kalman(series, 1)
        assert kalman.method == "kalman"
        np.testing.assert_allclose(kalman.lag_matrices, ols.lag_matrices, atol=1e-3)

    def test_tracks_coefficient_switch(self):
        rng = np.random.default_rng(11)
        n = 4000
        driver = rng.standard_normal(n)
        coupling = np.where(np.arange(n) < n // 2, 0.2, 0.7)
        y1 = np.zeros(n)
        y1[1:] = coupling[1:] * driver[:-1]
        y1 += 0.1 * rng.standard_normal(n)
        series = MultichannelSeries(("y1", "y2"), np.vstack([y1, driver]))

        tracked = fit_var_kalman(series, 1, KalmanConfig(q=1e-4))
        static = fit_var_ols(series, 1)
        assert abs(tracked.lag_matrices[0][0, 1] - 0.7) < 0.1
        assert abs(static.lag_matrices[0][0, 1] - 0.7) > 0.15

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            KalmanConfig(q=-1.0)
        with pytest.raises(InvalidParameterError):
            KalmanConfig(r=0.0)


class TestResiduals:

    def test_shape_and_start_index(self):
        series = simulate_var1(TRUE_M1, 1000)
        model = fit_var_ols(series, 2)
        resid = residuals(series, model)
        assert resid.data.shape == (2, 998)
        assert resid.start_index == 2

    def test_near_zero_mean(self):
        series = simulate_var1(TRUE_M1, 20000)
        resid = residuals(series, fit_var_ols(series, 1))
        assert np.all(np.abs(resid.data.mean(axis=1)) < 0.05)

    def test_noise_free_series_has_zero_residuals(self):
        y = np.zeros((2, 60))
        y[:, 0] = [1.0, -2.0]
        for t in range(1, 60):
            y[:, t] = TRUE_M1 @ y[:, t - 1]
        model = VarModel(TRUE_M1[None], np.eye(2))
        resid = residuals(MultichannelSeries(("a", "b"), y), model)
        assert np.abs(resid.data).max() < 1e-10

    def test_zero_lags_leave_series_tail(self):
        series = simulate_var1(TRUE_M1, 100, seed=7)
        model = VarModel(np.zeros((3, 2, 2)), np.eye(2))
        resid = residuals(series, model)
        np.testing.assert_array_equal(resid.data, series.data[:, 3:])

    def test_channel_mismatch(self):
        model = fit_var_ols(simulate_var1(TRUE_M1, 500), 1)
        other = MultichannelSeries(("a",), np.arange(10.0))
        with pytest.raises(DimensionMismatchError):
            residuals(other, model)


class TestGrangerStatistic:

    def test_ratio_two(self):
        assert granger_statistic(2.0, 1.0) == pytest.approx(np.log(2), abs=1e-12)

    def test_equal_variances(self):
        assert granger_statistic(1.5, 1.5) == 0.0

    @pytest.mark.parametrize("restricted,full", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_non_positive(self, restricted, full):
        with pytest.raises(InvalidParameterError):
            granger_statistic(restricted, full)


class TestPairwiseGranger:

    def test_planted_coupling(self, causal_pair):
        forward = pairwise_granger(causal_pair, "y2", "y1", 1)
        reverse = pairwise_granger(causal_pair, "y1", "y2", 1)
        assert abs(forward.f_value - np.log(82)) < 0.2
        assert forward.causes()
        assert reverse.f_value < 0.05

    def test_independent(self, uncorrelated_pair):
        for source, target in [("y1", "y2"), ("y2", "y1")]:
            result = pairwise_granger(uncorrelated_pair, source, target, 2)
            assert result.f_value < 0.01

    @pytest.mark.parametrize("seed", range(5))
    def test_nested_fits_never_negative(self, seed):
        rng = np.random.default_rng(seed)
        series = MultichannelSeries(("a", "b"), rng.standard_normal((2, 300)))
        result = pairwise_granger(series, "a", "b", 3)
        assert result.var_full <= result.var_restricted
        assert result.f_value >= -1e-12

    @pytest.mark.parametrize("n_samples,fits", [(9, False), (10, True)])
    def test_sample_boundary(self, n_samples, fits):
        rng = np.random.default_rng(2)
        series = MultichannelSeries(("a", "b"), rng.standard_normal((2, n_samples)))
        if fits:
            assert pairwise_granger(series, "a", "b", 3).f_value >= -1e-12
        else:
            with pytest.raises(InsufficientDataError):
                pairwise_granger(series, "a", "b", 3)

    def test_self_pair(self, causal_pair):
        with pytest.raises(SelfPairError):
            pairwise_granger(causal_pair, "y1", "y1", 1)

    def test_unknown_channel(self, causal_pair):
        with pytest.raises(UnknownChannelError):
            pairwise_granger(causal_pair, "y9", "y1", 1)

    def test_to_dict_fields(self, causal_pair):
        row = pairwise_granger(causal_pair, "y2", "y1", 1).to_dict()
        assert list(row) == ["source", "target", "var_restricted", "var_full", "f_value"]


class TestGrangerTable:

    def test_all_ordered_pairs(self):
        series = simulate_var1(np.diag([0.5, 0.5, 0.5]), 500)
        results = granger_table(series, 1)
        assert len(results) == 6
        assert all(r.source != r.target for r in results)

    def test_requested_subset_in_order(self, causal_pair):
        results = granger_table(causal_pair, 1, [("y2", "y1"), ("y1", "y2")])
        assert [(r.source, r.target) for r in results] == [("y2", "y1"), ("y1", "y2")]


class TestYuleWalker:

    def test_closed_form_example(self):
        s1, s2 = yule_walker_ar2(0.5, 0.3)
        assert round(s1, 4) == 0.4667
        assert round(s2, 4) == 0.0667

    def test_ar1_collapse(self):
        rho = 0.5
        assert yule_walker_ar2(rho, rho ** 2) == (rho, 0.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateCorrelationError):
            yule_walker_ar2(1.0, 0.5)

    def test_toeplitz_solver_agrees_with_closed_form(self):
        np.testing.assert_allclose(yule_walker([0.5, 0.3]), yule_walker_ar2(0.5, 0.3), atol=1e-12)

    def test_ar1_from_toeplitz(self):
        np.testing.assert_allclose(yule_walker([0.7]), [0.7])

    def test_sample_agreement_with_ols(self):
        series = simulate_ar2(0.5, 0.2, 50000)
        rho = autocorrelation(series, "y", 2).rho
        closed = yule_walker_ar2(rho[0], rho[1])
        ols = fit_var_ols(series, 2).lag_matrices[:, 0, 0]
        assert abs(closed.s1 - ols[0]) < 0.02
        assert abs(closed.s2 - ols[1]) < 0.02
