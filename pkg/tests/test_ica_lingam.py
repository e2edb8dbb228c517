"""
FastICA, LiNGAM post-processing and DAG pruning.

Known values:
- W = [[1, 0], [-0.5, 1]] gives s0 = [[0, 0], [0.5, 0]] in causal order (0, 1)
- n2 = 0.8 n1 + e2 with Laplace noise recovers s0[1, 0] = 0.8
"""
import warnings

import numpy as np
import pytest

from models.ica_lingam import (
    IcaConfig,
    IcaConvergence,
    IcaResult,
    StructuralMatrix,
    amari_error,
    check_non_gaussianity,
    excess_kurtosis,
    fastica,
    lingam_from_ica,
    prune_to_dag,
    whiten,
)
from utils.exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    NoConvergenceError,
    NonGaussianityWarning,
    PermutationDegenerateError,
    RankDeficientError,
)


def laplace_sources(n_channels, n_samples, seed):
    rng = np.random.default_rng(seed)
    return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(n_channels, n_samples))


def result_from(unmixing):
    unmixing = np.asarray(unmixing, dtype=float)
    convergence = IcaConvergence(iterations=1, final_delta=0.0, converged=True, gaussian_flag=False, kurtosis=())
    return IcaResult(unmixing=unmixing, components=np.zeros((unmixing.shape[0], 1)), convergence=convergence)


class TestWhiten:

    def test_identity_covariance(self):
        rng = np.random.default_rng(0)
        data = np.array([[2.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.5, -0.3, 0.2]]) @ rng.standard_normal((3, 5000))
        white = whiten(data).whitened
        covariance = np.cov(white, bias=True)
        np.testing.assert_allclose(covariance, np.eye(3), atol=1e-8)
        eigenvalues = np.linalg.eigvalsh(covariance)
        assert np.all(np.abs(eigenvalues - 1.0) < 1e-6)

    def test_white_data_gives_identity_matrix(self):
        rng = np.random.default_rng(1)
        already_white = whiten(rng.standard_normal((2, 100000))).whitened
        np.testing.assert_allclose(whiten(already_white).whitening_matrix, np.eye(2), atol=1e-6)

    def test_duplicated_channel(self):
        x = np.random.default_rng(2).standard_normal(1000)
        with pytest.raises(RankDeficientError):
            whiten(np.vstack([x, x]))


class TestFastIca:

    def test_identity_mixing(self):
        sources = laplace_sources(2, 50000, seed=3)
        ica = fastica(sources)
        assert amari_error(ica.unmixing, np.eye(2)) < 0.05
        assert np.all(np.abs(ica.unmixing).max(axis=1) > 0.95)
        assert ica.convergence.converged

    def test_known_mixing(self):
        mixing = np.array([[1.0, 0.5], [0.2, 1.0]])
        ica = fastica(mixing @ laplace_sources(2, 50000, seed=4))
        assert amari_error(ica.unmixing, mixing) < 0.05

    @pytest.mark.parametrize("contrast,strategy", [("cube", "symmetric"), ("logcosh", "deflation")])
    def test_variants(self, contrast, strategy):
        mixing = np.array([[1.0, 0.5], [0.2, 1.0]])
        config = IcaConfig(contrast=contrast, strategy=strategy)
        ica = fastica(mixing @ laplace_sources(2, 50000, seed=5), config)
        assert amari_error(ica.unmixing, mixing) < 0.05

    def test_components_uncorrelated_unit_variance(self):
        mixing = np.array([[1.0, 0.3, 0.0], [0.4, 1.0, 0.2], [0.0, 0.5, 1.0]])
        ica = fastica(mixing @ laplace_sources(3, 20000, seed=6))
        covariance = np.cov(ica.components, bias=True)
        np.testing.assert_allclose(np.diag(covariance), 1.0, atol=1e-6)
        off_diagonal = covariance - np.diag(np.diag(covariance))
        assert np.abs(off_diagonal).max() < 5e-2

    def test_gaussian_sources_are_flagged(self):
        rng = np.random.default_rng(7)
        data = np.array([[1.0, 0.5], [0.2, 1.0]]) @ rng.standard_normal((2, 50000))
        try:
            ica = fastica(data)
        except NoConvergenceError:
            return
        assert ica.convergence.gaussian_flag

    def test_no_convergence_reports_delta(self):
        mixing = np.array([[1.0, 0.5], [0.2, 1.0]])
        config = IcaConfig(max_iter=2, tol=1e-15)
        with pytest.raises(NoConvergenceError) as info:
            fastica(mixing @ laplace_sources(2, 5000, seed=8), config)
        assert info.value.iterations == 2
        assert info.value.final_delta > 0

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientDataError):
            fastica(laplace_sources(3, 149, seed=9))

    def test_same_seed_is_bit_identical(self):
        data = np.array([[1.0, 0.5], [0.2, 1.0]]) @ laplace_sources(2, 10000, seed=10)
        first = fastica(data, IcaConfig(seed=3))
        second = fastica(data, IcaConfig(seed=3))
        np.testing.assert_array_equal(first.unmixing, second.unmixing)

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            IcaConfig(contrast="exp")
        with pytest.raises(InvalidParameterError):
            IcaConfig(strategy="parallel")

    @pytest.mark.slow
    def test_identifiability_sweep(self):
        rng = np.random.default_rng(100)
        successes = 0
        for trial in range(100):
            while True:
                mixing = rng.uniform(-1.0, 1.0, size=(2, 2))
                if np.linalg.cond(mixing) < 100:
                    break
            try:
                ica = fastica(mixing @ laplace_sources(2, 50000, seed=1000 + trial), IcaConfig(seed=trial))
            except NoConvergenceError:
                continue
            successes += amari_error(ica.unmixing, mixing) < 0.05
        assert successes >= 95


class TestLingamFromIca:

    def test_identity_unmixing(self):
        structural = lingam_from_ica(result_from(np.eye(3)))
        np.testing.assert_array_equal(structural.s0, np.zeros((3, 3)))
        assert not structural.pruned

    def test_triangular_unmixing(self):
        structural = lingam_from_ica(result_from([[1.0, 0.0], [-0.5, 1.0]]))
        np.testing.assert_array_equal(structural.s0, [[0.0, 0.0], [0.5, 0.0]])
        assert structural.causal_order == (0, 1)

    def test_row_permutation_and_scale_are_resolved(self):
        # Rows of [[1, 0], [-0.5, 1]] swapped and rescaled by 2 and -3
        structural = lingam_from_ica(result_from([[-1.0, 2.0], [-3.0, 0.0]]))
        np.testing.assert_allclose(structural.s0, [[0.0, 0.0], [0.5, 0.0]], atol=1e-15)
        assert structural.causal_order == (0, 1)

    def test_degenerate_permutation(self):
        with pytest.raises(PermutationDegenerateError):
            lingam_from_ica(result_from([[0.0, 1.0], [0.0, 1.0]]))

    def test_assignment_path_for_many_channels(self):
        rng = np.random.default_rng(12)
        n = 9
        b = np.tril(np.full((n, n), 0.3), k=-1)
        scale = rng.uniform(0.5, 2.0, size=n) * rng.choice([-1.0, 1.0], size=n)
        w = (scale[:, None] * (np.eye(n) - b))[rng.permutation(n)]
        structural = lingam_from_ica(result_from(w))
        np.testing.assert_allclose(structural.s0, b, atol=1e-12)
        assert structural.causal_order == tuple(range(n))

    def test_recovers_structural_coefficient(self):
        rng = np.random.default_rng(13)
        e = rng.laplace(0.0, 1.0, size=(2, 50000))
        n1 = e[0]
        n2 = 0.8 * n1 + e[1]
        structural = lingam_from_ica(fastica(np.vstack([n1, n2])))
        assert abs(structural.s0[1, 0] - 0.8) < 0.05
        assert abs(structural.s0[0, 1]) < 0.05
        assert structural.causal_order == (0, 1)

    def test_same_seed_same_s0(self):
        rng = np.random.default_rng(14)
        e = rng.laplace(size=(3, 20000))
        data = np.array([[1.0, 0.0, 0.0], [0.6, 1.0, 0.0], [0.0, -0.4, 1.0]]) @ e
        first = lingam_from_ica(fastica(data, IcaConfig(seed=5)))
        second = lingam_from_ica(fastica(data, IcaConfig(seed=5)))
        np.testing.assert_array_equal(first.s0, second.s0)


class TestPruneToDag:

    def test_triangular_unchanged(self):
        s0 = np.array([[0.0, 0.0], [0.3, 0.0]])
        pruned = prune_to_dag(StructuralMatrix(s0, (0, 1)), 0.0)
        np.testing.assert_array_equal(pruned.s0, s0)
        assert pruned.pruned

    def test_threshold_then_triangularity(self):
        pruned = prune_to_dag(StructuralMatrix([[0.0, 0.04], [0.8, 0.0]], (0, 1)), 0.05)
        np.testing.assert_array_equal(pruned.s0, [[0.0, 0.0], [0.8, 0.0]])

    def test_entries_against_causal_order_removed(self):
        pruned = prune_to_dag(StructuralMatrix([[0.0, 0.7], [0.6, 0.0]], (1, 0)), 0.05)
        np.testing.assert_array_equal(pruned.s0, [[0.0, 0.7], [0.0, 0.0]])

    @pytest.mark.parametrize("seed", range(5))
    def test_random_output_is_nilpotent_and_acyclic(self, seed):
        rng = np.random.default_rng(seed)
        w = rng.uniform(-1.0, 1.0, size=(4, 4)) + 3.0 * np.eye(4)
        pruned = prune_to_dag(lingam_from_ica(result_from(w)), 0.05)
        assert np.abs(np.linalg.matrix_power(pruned.s0, 4)).max() < 1e-12
        assert pruned.is_acyclic()
        for i in range(4):
            for j in range(4):
                assert pruned.s0[i, j] == 0 or pruned.s0[j, i] == 0

    def test_negative_threshold(self):
        with pytest.raises(InvalidParameterError):
            prune_to_dag(StructuralMatrix(np.zeros((2, 2)), (0, 1)), -0.1)


class TestStructuralMatrix:

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(InvalidParameterError):
            StructuralMatrix([[0.1, 0.0], [0.0, 0.0]], (0, 1))

    def test_bad_causal_order(self):
        with pytest.raises(InvalidParameterError):
            StructuralMatrix(np.zeros((2, 2)), (0, 0))

    def test_pruned_must_be_triangular(self):
        with pytest.raises(InvalidParameterError):
            StructuralMatrix([[0.0, 0.5], [0.0, 0.0]], (0, 1), pruned=True)

    def test_graph_direction(self):
        graph = StructuralMatrix([[0.0, 0.0], [0.5, 0.0]], (0, 1)).graph(["a", "b"])
        assert list(graph.edges(data="weight")) == [("a", "b", 0.5)]


class TestDiagnostics:

    def test_amari_zero_for_scaled_permutation(self):
        mixing = np.array([[1.0, 0.5], [0.2, 1.0]])
        unmixing = np.array([[0.0, -2.0], [3.0, 0.0]]) @ np.linalg.inv(mixing)
        assert amari_error(unmixing, mixing) == pytest.approx(0.0, abs=1e-12)

    def test_amari_positive_for_rotation(self):
        rotation = np.array([[np.cos(0.4), -np.sin(0.4)], [np.sin(0.4), np.cos(0.4)]])
        assert amari_error(rotation, np.eye(2)) > 0.1

    def test_laplace_kurtosis(self):
        kurtosis = excess_kurtosis(laplace_sources(1, 1000000, seed=15))
        assert abs(kurtosis[0] - 3.0) < 0.3

    def test_gaussian_residuals_warn(self):
        data = np.random.default_rng(16).standard_normal((3, 50000))
        with pytest.warns(NonGaussianityWarning):
            message = check_non_gaussianity(data)
        assert "Gaussian" in message

    def test_laplace_residuals_pass(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert check_non_gaussianity(laplace_sources(2, 20000, seed=17)) is None
