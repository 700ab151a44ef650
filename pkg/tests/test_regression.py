import numpy as np
import pytest

from transfermetrics.data import FeatureSet
from transfermetrics.exceptions import ValidationError
from transfermetrics.metrics import (
    h_score,
    linear_metric,
    linear_valid_metric,
    logme_score,
    pactran_gaussian,
)
from transfermetrics.metrics.regression import logme_single
from transfermetrics.numerics import OptimizerConfig


def log_evidence(X, t, alpha, beta):
    """Gaussian evidence of targets t under w ~ N(0, 1/alpha), noise 1/beta, written directly."""
    n, d = X.shape
    C = np.eye(n) / beta + X @ X.T / alpha
    sign, logdet = np.linalg.slogdet(C)
    return -0.5 * (n * np.log(2 * np.pi) + logdet + t @ np.linalg.solve(C, t))


class TestHScore:
    def test_constant_features(self):
        assert h_score(np.ones((6, 3)), [0, 1, 2, 0, 1, 2]).score == 0.0

    def test_one_hot_features(self):
        y = np.array([0, 1, 0, 1])
        np.testing.assert_allclose(h_score(np.eye(2)[y], y).score, 1.0, atol=1e-12)

    def test_noise_column(self):
        rng = np.random.default_rng(0)
        y = np.arange(500) % 3
        X = rng.standard_normal((500, 4)) + np.eye(3, 4)[y]
        base = h_score(X, y).score
        noisy = h_score(np.column_stack([X, rng.standard_normal(500)]), y).score
        assert abs(noisy - base) <= 0.05

    def test_affine_invariance(self, rng):
        y = np.arange(40) % 4
        X = rng.standard_normal((40, 3)) + np.eye(4, 3)[y]
        A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        np.testing.assert_allclose(h_score(X @ A + 5.0, y).score, h_score(X, y).score, rtol=1e-6)

    def test_absent_class(self):
        with pytest.raises(ValidationError):
            h_score(np.zeros((4, 1)), [0, 0, 2, 2], num_classes=3)


class TestLogme:
    def test_linear_targets_beat_shuffled(self):
        rng = np.random.default_rng(1)
        y = np.arange(60) % 3
        X = np.eye(3)[y] + 1e-3 * rng.standard_normal((60, 3))
        assert logme_score(X, y).score > logme_score(X, rng.permutation(y)).score

    def test_pure_noise_matches_null_model(self):
        rng = np.random.default_rng(5)
        n = 200
        X = rng.standard_normal((n, 2))
        y = rng.integers(0, 2, n)
        # with uninformative features the optimum sends alpha -> infinity, leaving
        # the null model t ~ N(0, 1/beta I) maximized over beta on a dense grid
        per_class = []
        for c in range(2):
            t = (y == c).astype(float)
            grid = np.logspace(-3, 3, 20001)
            null = -0.5 * n * np.log(2 * np.pi) + 0.5 * n * np.log(grid) - 0.5 * grid * (t @ t)
            per_class.append(null.max() / n)
        assert abs(logme_score(X, y).score - np.mean(per_class)) <= 1e-3

    def test_grid_oracle(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((8, 2))
        y = np.array([0, 1] * 4)
        grid = np.logspace(-4, 4, 200)
        expected = []
        for c in range(2):
            t = (y == c).astype(float)
            best = max(log_evidence(X, t, a, b) for a in grid for b in grid)
            expected.append(best / 8)
        assert abs(logme_score(X, y).score - np.mean(expected)) <= 1e-3

    def test_evidence_monotone(self, rng):
        for _ in range(20):
            X = rng.standard_normal((25, 6))
            t = rng.standard_normal(25)
            u, s, _ = np.linalg.svd(X, full_matrices=False)
            state = logme_single(s**2, u, t, 6)
            assert np.all(np.diff(state.evidence_trace) >= -1e-9)

    def test_diagnostics(self, rng):
        res = logme_score(rng.standard_normal((20, 3)), np.arange(20) % 2)
        assert all(a > 0 for a in res.diagnostics["alpha"])
        assert all(b > 0 for b in res.diagnostics["beta_noise"])


class TestLinear:
    def test_zero_features(self):
        res = linear_metric(np.zeros((6, 2)), np.arange(6) % 3, beta=5.0)
        np.testing.assert_allclose(res.score, np.log(3), rtol=1e-12)

    def test_separable_below_log_k(self):
        y = np.arange(12) % 3
        assert linear_metric(np.eye(3)[y], y, beta=120.0).score < np.log(3)

    def test_equals_rer(self, rng):
        X = rng.standard_normal((15, 3))
        y = np.arange(15) % 3
        _, g = pactran_gaussian(X, y, 3, 30.0, 1.0)
        assert linear_metric(X, y, beta=30.0).score == g.rer

    def test_monotone_in_beta(self, rng):
        X = rng.standard_normal((20, 3))
        y = rng.integers(0, 3, 20)
        vals = [linear_metric(X, y, beta=b, num_classes=3).score for b in (0.1, 1, 10, 100)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


class TestLinearValid:
    def test_separable(self):
        y = np.arange(20) % 2
        X = np.column_stack([2.0 * y - 1.0, np.zeros(20)])
        assert linear_valid_metric(X, y).score == 0.0

    def test_independent_labels(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 2, 400)
        assert abs(linear_valid_metric(rng.standard_normal((400, 3)), y).score - 0.5) <= 0.15

    def test_three_fits_and_tie_break(self):
        y = np.arange(20) % 2
        res = linear_valid_metric(np.eye(2)[y], y)
        assert res.diagnostics["n_fits"] == 3
        assert res.diagnostics["chosen_beta"] == pytest.approx(0.1 * 20)

    def test_scaling_invariance(self, rng):
        y = np.arange(40) % 3
        X = rng.standard_normal((40, 3)) + np.eye(3)[y]
        cfg = OptimizerConfig(gradient_tolerance=1e-10)
        grid = [2.0, 20.0, 200.0]
        c = 4.0
        a = linear_valid_metric(X, y, beta_grid=grid, config=cfg)
        b = linear_valid_metric(c * X, y, beta_grid=[g / c**2 for g in grid], intercept_scaling=c, config=cfg)
        assert a.score == b.score
        assert list(a.diagnostics["errors"].values()) == list(b.diagnostics["errors"].values())

    def test_flags_missing_class(self):
        y = np.array([0, 0, 1, 1, 2])
        res = linear_valid_metric(np.arange(5.0)[:, None], y)
        missing = res.diagnostics["classes_missing_from_train_fold"] + res.diagnostics["classes_missing_from_valid_fold"]
        assert 2 in missing

    def test_accepts_feature_set(self, rng):
        fs = FeatureSet(rng.standard_normal((10, 2)), np.arange(10) % 2)
        assert 0.0 <= linear_valid_metric(fs).score <= 1.0
