import numpy as np
import pytest
from scipy.stats import multivariate_normal

from transfermetrics.exceptions import ValidationError
from transfermetrics.numerics import GmmModel, gmm_fit, gmm_posterior


class TestGmmFit:
    def test_separated_clouds(self, rng):
        a = rng.standard_normal((30, 2))
        b = rng.standard_normal((30, 2)) + [20.0, 0.0]
        X = np.vstack([a, b])
        post = gmm_posterior(gmm_fit(X, 2, seed=0), X)
        own = np.where(post[:30].mean(axis=0)[0] > 0.5, 0, 1)
        assert np.all(post[:30, own] >= 0.99)
        assert np.all(post[30:, 1 - own] >= 0.99)

    def test_single_component_is_sample_moments(self, rng):
        X = rng.standard_normal((50, 3)) @ rng.standard_normal((3, 3))
        model = gmm_fit(X, 1)
        np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(
            model.covariances[0], np.cov(X.T, bias=True) + 1e-6 * np.eye(3), atol=1e-10
        )

    @pytest.mark.parametrize("seed", range(10))
    def test_log_likelihood_monotone(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((20, 3))
        model = gmm_fit(X, 10, seed=seed)
        assert np.all(np.diff(model.trace) >= -1e-9)

    def test_invariants(self, rng):
        model = gmm_fit(rng.standard_normal((60, 3)), 3)
        np.testing.assert_allclose(model.weights.sum(), 1.0, atol=1e-9)
        for cov in model.covariances:
            np.testing.assert_allclose(cov, cov.T, atol=1e-9)
            assert np.linalg.eigvalsh(cov).min() >= 1e-6 * (1 - 1e-9)

    def test_deterministic(self, rng):
        X = rng.standard_normal((40, 2))
        a, b = gmm_fit(X, 3, seed=5), gmm_fit(X, 3, seed=5)
        np.testing.assert_array_equal(a.means, b.means)

    def test_too_many_components(self):
        with pytest.raises(ValidationError):
            gmm_fit(np.zeros((3, 2)), 4)


class TestGmmPosterior:
    def test_single_component(self, rng):
        X = rng.standard_normal((8, 2))
        post = gmm_posterior(gmm_fit(X, 1), X)
        np.testing.assert_allclose(post, 1.0)

    def test_equidistant_point(self):
        model = GmmModel(np.array([0.5, 0.5]), np.array([[-1.0, 0.0], [1.0, 0.0]]), np.stack([np.eye(2)] * 2))
        np.testing.assert_allclose(gmm_posterior(model, [[0.0, 3.0]]), [[0.5, 0.5]], atol=1e-15)

    def test_matches_direct_density_ratio(self):
        rng = np.random.default_rng(2)
        model = GmmModel(
            np.array([0.3, 0.7]),
            rng.standard_normal((2, 2)),
            np.array([[[1.0, 0.3], [0.3, 2.0]], [[0.5, -0.1], [-0.1, 0.8]]]),
        )
        X = rng.standard_normal((10, 2))
        dens = np.column_stack(
            [w * multivariate_normal(m, c).pdf(X) for w, m, c in zip(model.weights, model.means, model.covariances)]
        )
        np.testing.assert_allclose(gmm_posterior(model, X), dens / dens.sum(axis=1, keepdims=True), atol=1e-10)

    def test_rows_sum_to_one_far_away(self, rng):
        X = rng.standard_normal((30, 2))
        post = gmm_posterior(gmm_fit(X, 3), X * 1e3)
        np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)

    def test_dimension_mismatch(self, rng):
        model = gmm_fit(rng.standard_normal((10, 2)), 2)
        with pytest.raises(ValidationError):
            gmm_posterior(model, np.zeros((3, 3)))
