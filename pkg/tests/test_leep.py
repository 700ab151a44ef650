import math

import numpy as np
import pytest

from transfermetrics.data import FeatureSet
from transfermetrics.exceptions import ValidationError
from transfermetrics.metrics import leep_conditional, leep_score, nce_score, nleep_score


def direct_conditional(M, y, k):
    n, nz = M.shape
    joint = [[0.0] * nz for _ in range(k)]
    for i in range(n):
        for z in range(nz):
            joint[y[i]][z] += M[i, z] / n
    cond = np.empty((k, nz))
    for z in range(nz):
        col = sum(joint[c][z] for c in range(k))
        for c in range(k):
            cond[c, z] = joint[c][z] / col
    return cond


def direct_leep(M, y, k):
    cond = direct_conditional(M, y, k)
    total = 0.0
    for i in range(len(y)):
        total += math.log(sum(cond[y[i], z] * M[i, z] for z in range(M.shape[1])))
    return total / len(y)


class TestLeepConditional:
    def test_aligned_one_hot_is_identity(self):
        np.testing.assert_array_equal(leep_conditional(np.eye(2), [0, 1], 2), np.eye(2))

    def test_uniform_rows_give_label_frequencies(self):
        y = np.array([0, 1, 1, 2, 2, 2])
        cond = leep_conditional(np.full((6, 4), 0.25), y, 3)
        np.testing.assert_allclose(cond, np.tile([[1 / 6], [2 / 6], [3 / 6]], (1, 4)), atol=1e-15)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(6)
        M = rng.dirichlet(np.ones(3), 6)
        y = np.array([0, 1, 0, 1, 1, 0])
        np.testing.assert_allclose(leep_conditional(M, y, 2), direct_conditional(M, y, 2), atol=1e-12)

    def test_empty_column_uniform(self):
        M = np.array([[1.0, 0.0], [1.0, 0.0]])
        cond, empty = leep_conditional(M, [0, 1], 2, return_empty=True)
        np.testing.assert_array_equal(empty, [1])
        np.testing.assert_array_equal(cond[:, 1], [0.5, 0.5])

    def test_unnormalized_rejected(self):
        with pytest.raises(ValidationError):
            leep_conditional([[0.5, 0.9]], [0], 2)


class TestLeepScore:
    def test_aligned_one_hot(self):
        assert leep_score(np.eye(3), [0, 1, 2], 3).score == 0.0

    def test_uniform_balanced(self):
        np.testing.assert_allclose(leep_score(np.full((4, 3), 1 / 3), [0, 1, 0, 1], 2).score, -np.log(2))

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(10)
        M = rng.dirichlet(np.ones(4), 10)
        y = rng.integers(0, 3, 10)
        np.testing.assert_allclose(leep_score(M, y, 3).score, direct_leep(M, y, 3), atol=1e-12)

    def test_column_permutation_invariance(self, rng):
        M = rng.dirichlet(np.ones(5), 20)
        y = rng.integers(0, 3, 20)
        perm = rng.permutation(5)
        assert leep_score(M, y, 3).score == pytest.approx(leep_score(M[:, perm], y, 3).score, abs=1e-14)

    def test_non_positive(self, rng):
        for _ in range(20):
            M = rng.dirichlet(np.ones(3), 8)
            assert leep_score(M, rng.integers(0, 2, 8), 2).score <= 1e-15


class TestNce:
    def test_deterministic_mapping(self):
        y = np.array([0, 1, 2, 0, 1, 2])
        M = np.eye(4)[[3, 0, 1, 3, 0, 1]] * 0.7 + 0.075
        assert nce_score(M, y, 3).score == 0.0

    def test_independent_balanced(self):
        M = np.eye(2)[[0, 0, 1, 1]]
        np.testing.assert_allclose(nce_score(M, [0, 1, 0, 1], 2).score, -np.log(2))

    def test_leep_bounds_nce_for_one_hot(self, rng):
        for _ in range(30):
            M = np.eye(4)[rng.integers(0, 4, 12)]
            y = rng.integers(0, 3, 12)
            assert leep_score(M, y, 3).score >= nce_score(M, y, 3).score - 1e-12

    def test_argmax_preserving_transform(self, rng):
        M = rng.dirichlet(np.ones(4), 15)
        y = rng.integers(0, 3, 15)
        T = M**3
        T /= T.sum(axis=1, keepdims=True)
        assert nce_score(M, y, 3).score == nce_score(T, y, 3).score


class TestNleep:
    def test_pure_clusters(self, rng):
        y = np.repeat(np.arange(3), 15)
        centers = np.array([[0, 0], [20, 0], [0, 20]], float)
        X = centers[y] + rng.standard_normal((45, 2))
        assert nleep_score(FeatureSet(X, y)).score >= -0.01

    def test_independent_features(self):
        rng = np.random.default_rng(4)
        y = np.arange(200) % 2
        res = nleep_score(rng.standard_normal((200, 3)), y)
        assert abs(res.score + np.log(2)) <= 0.1

    def test_diagnostics_and_determinism(self, rng):
        X = rng.standard_normal((30, 5))
        y = np.arange(30) % 3
        a, b = nleep_score(X, y, seed=2), nleep_score(X, y, seed=2)
        assert a.score == b.score
        assert a.diagnostics["max_row_sum_error"] <= 1e-9
        assert {"pca_dim", "gmm_log_likelihood"} <= set(a.diagnostics)
