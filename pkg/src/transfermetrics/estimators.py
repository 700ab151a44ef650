"""scikit-learn compatible wrappers around the probes and metrics."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ValidationError
from .metrics import (
    MetricResult,
    h_score,
    leep_score,
    linear_metric,
    linear_valid_metric,
    logme_score,
    nce_score,
    nleep_score,
    pactran_dirichlet,
    pactran_gamma,
    pactran_gaussian,
)
from .numerics import OptimizerConfig, fit_l2_softmax, gmm_fit, gmm_posterior, pca_fit
from .numerics.linear import logits
from .numerics.special import softmax


class L2SoftmaxClassifier(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression with penalty ``||theta||^2 / (2 beta)``.

    Parameters
    ----------
    beta : float
        Inverse regularization strength.
    intercept_scaling : float
        Value of the constant feature that multiplies the (regularized) bias.
    max_iterations : int
    gradient_tolerance : float
    """

    def __init__(self, beta=1.0, intercept_scaling=1.0, max_iterations=500, gradient_tolerance=1e-6):
        self.beta = beta
        self.intercept_scaling = intercept_scaling
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, codes = np.unique(y, return_inverse=True)
        config = OptimizerConfig(
            max_iterations=self.max_iterations, gradient_tolerance=self.gradient_tolerance
        )
        fit = fit_l2_softmax(
            X, codes, self.beta, self.classes_.size, self.intercept_scaling, config
        )
        self.theta_ = fit.theta
        self.coef_ = fit.theta[:-1].T
        self.intercept_ = self.intercept_scaling * fit.theta[-1]
        self.loss_ = fit.loss
        self.converged_ = fit.converged
        self.n_iter_ = fit.iterations
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return logits(X, self.theta_, self.intercept_scaling)

    def predict_proba(self, X):
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class EnergyPCA(TransformerMixin, BaseEstimator):
    """PCA keeping the fewest components that carry ``energy_fraction`` of the variance."""

    def __init__(self, energy_fraction=0.8):
        self.energy_fraction = energy_fraction

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.model_ = pca_fit(X, self.energy_fraction)
        self.components_ = self.model_.components
        self.mean_ = self.model_.mean
        self.n_components_ = self.model_.n_components
        self.explained_energy_fraction_ = self.model_.explained_energy_fraction
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return self.model_.transform(check_array(X, dtype=np.float64))


class GaussianMixtureEM(BaseEstimator):
    """Full-covariance Gaussian mixture fitted by EM with k-means++ restarts."""

    def __init__(self, n_components=1, random_state=0, n_init=3, max_iter=200, tol=1e-6, reg_covar=1e-6):
        self.n_components = n_components
        self.random_state = random_state
        self.n_init = n_init
        self.max_iter = max_iter
        self.tol = tol
        self.reg_covar = reg_covar

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.model_ = gmm_fit(
            X,
            self.n_components,
            seed=self.random_state,
            restarts=self.n_init,
            max_iter=self.max_iter,
            tol=self.tol,
            reg_covar=self.reg_covar,
        )
        self.weights_ = self.model_.weights
        self.means_ = self.model_.means
        self.covariances_ = self.model_.covariances
        self.converged_ = self.model_.converged
        self.n_iter_ = self.model_.n_iter
        self.lower_bound_ = self.model_.log_likelihood
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return gmm_posterior(self.model_, check_array(X, dtype=np.float64))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


SOURCE_INPUT = frozenset({"leep", "nce", "pt_dir", "pt_gam"})


class TransferabilityScorer(BaseEstimator):
    """Fit-once scorer exposing ``score_`` and ``diagnostics_``.

    ``X`` holds source-head outputs for ``leep``, ``nce``, ``pt_dir`` and
    ``pt_gam``, and penultimate features for every other metric. Raw metric
    values are stored; ``transferability_`` flips the sign of loss-type
    metrics so that higher always means more transferable.

    Parameters
    ----------
    metric : str
        One of leep, nce, nleep, hscore, logme, linear, linear_valid,
        pt_dir, pt_gam, pt_gauss.
    beta, sigma0_sq : float, optional
        PT-Gauss and LINEAR hyperparameters; default to ``10 N`` and
        ``100 / (D + 1)``.
    num_classes : int, optional
    random_state : int
        Seed for N-LEEP and the LINEAR-VALID split.
    """

    METRICS = ("leep", "nce", "nleep", "hscore", "logme", "linear", "linear_valid", "pt_dir", "pt_gam", "pt_gauss")
    _LOSSES = frozenset({"linear", "pt_dir", "pt_gam", "pt_gauss"})

    def __init__(self, metric="pt_gauss", beta=None, sigma0_sq=None, num_classes=None, random_state=0):
        self.metric = metric
        self.beta = beta
        self.sigma0_sq = sigma0_sq
        self.num_classes = num_classes
        self.random_state = random_state

    def fit(self, X, y):
        if self.metric not in self.METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}")
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.int64)
        k = self.num_classes
        n, d_eff = X.shape[0], X.shape[1] + 1
        beta = self.beta if self.beta is not None else 10.0 * n
        sigma0_sq = self.sigma0_sq if self.sigma0_sq is not None else 100.0 / d_eff
        m = self.metric
        if m == "leep":
            res = leep_score(X, y, k)
        elif m == "nce":
            res = nce_score(X, y, k)
        elif m == "nleep":
            res = nleep_score(X, y, seed=self.random_state)
        elif m == "hscore":
            res = h_score(X, y, k)
        elif m == "logme":
            res = logme_score(X, y, k)
        elif m == "linear":
            res = linear_metric(X, y, beta=beta, num_classes=k)
        elif m == "linear_valid":
            grid = None if self.beta is None else [self.beta]
            res = linear_valid_metric(X, y, beta_grid=grid, seed=self.random_state, num_classes=k)
        elif m == "pt_dir":
            score, state = pactran_dirichlet(X, y, k)
            res = MetricResult(m, score, {"iterations": state.iterations, "elbo_trace": state.elbo_trace})
        elif m == "pt_gam":
            score, state = pactran_gamma(X, y, k)
            res = MetricResult(m, score, {"iterations": state.iterations, "elbo_trace": state.elbo_trace})
        else:
            score, r = pactran_gaussian(X, y, k, beta, sigma0_sq)
            res = MetricResult(
                m, score, {"rer": r.rer, "fr": r.fr, "trace_hessian": r.trace_hessian, "hparams": r.hparams}
            )
        self.result_ = res
        self.score_ = float(res.score)
        self.diagnostics_ = res.diagnostics
        if m in self._LOSSES:
            self.transferability_ = -self.score_
        elif m == "linear_valid":
            self.transferability_ = 1.0 - self.score_
        else:
            self.transferability_ = self.score_
        return self
