"""Full-covariance Gaussian mixtures fitted by EM."""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..exceptions import ValidationError
from .special import log_sum_exp

COVARIANCE_FLOOR = 1e-6


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float = float("nan")
    converged: bool = False
    n_iter: int = 0
    trace: list = field(default_factory=list)

    @property
    def d(self):
        return self.means.shape[1]


def _log_gaussian(X, means, covariances):
    n, d = X.shape
    out = np.empty((n, means.shape[0]))
    for k, (mu, cov) in enumerate(zip(means, covariances)):
        chol = linalg.cholesky(cov, lower=True)
        sol = linalg.solve_triangular(chol, (X - mu).T, lower=True)
        out[:, k] = (
            -0.5 * np.sum(sol**2, axis=0)
            - np.sum(np.log(np.diag(chol)))
            - 0.5 * d * np.log(2.0 * np.pi)
        )
    return out


def _joint_log_prob(X, weights, means, covariances):
    with np.errstate(divide="ignore"):
        return _log_gaussian(X, means, covariances) + np.log(weights)


def _m_step(X, resp, reg):
    n, d = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((len(nk), d, d))
    for k in range(len(nk)):
        diff = X - means[k]
        covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k]
        covs[k] = 0.5 * (covs[k] + covs[k].T) + reg * np.eye(d)
    return weights / weights.sum(), means, covs


def _kmeanspp_resp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    dist = ((X[:, None, :] - np.asarray(centers)[None]) ** 2).sum(axis=2)
    resp = np.zeros((n, k))
    resp[np.arange(n), np.argmin(dist, axis=1)] = 1.0
    return resp


def _em(X, k, rng, max_iter, tol, reg):
    weights, means, covs = _m_step(X, _kmeanspp_resp(X, k, rng), reg)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jl = _joint_log_prob(X, weights, means, covs)
        lse = log_sum_exp(jl, axis=1, keepdims=True)
        ll = float(lse.sum())
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        weights, means, covs = _m_step(X, np.exp(jl - lse), reg)
    if not converged:
        jl = _joint_log_prob(X, weights, means, covs)
        trace.append(float(log_sum_exp(jl, axis=1).sum()))
    return GmmModel(weights, means, covs, trace[-1], converged, it, trace)


def gmm_fit(
    features,
    num_components,
    seed=0,
    restarts=3,
    max_iter=200,
    tol=1e-6,
    reg_covar=COVARIANCE_FLOOR,
):
    """Fit a full-covariance GMM, keeping the best of ``restarts`` EM runs.

    Each run starts from a k-means++ seeding (hard assignment to the nearest
    seed, then one M-step). EM stops once the total log-likelihood gains
    less than ``tol`` or after ``max_iter`` iterations. ``reg_covar * I`` is
    added to every covariance estimate.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("features must be an (N, d) matrix")
    if num_components < 1:
        raise ValidationError("num_components must be >= 1")
    if num_components > X.shape[0]:
        raise ValidationError(
            f"num_components={num_components} exceeds N={X.shape[0]}"
        )
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        model = _em(X, num_components, rng, max_iter, tol, reg_covar)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    return best


def gmm_posterior(model, features):
    """Cluster responsibilities ``p(v | s_i)`` normalized in log space."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValidationError(
            f"expected features with {model.d} columns, got shape {X.shape}"
        )
    jl = _joint_log_prob(X, model.weights, model.means, model.covariances)
    return np.exp(jl - log_sum_exp(jl, axis=1, keepdims=True))
