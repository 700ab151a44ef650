"""L2-regularized multinomial logistic regression.

Parameters are stored as a ``(D + 1, K)`` matrix ``theta`` whose last row is
the bias. Logits are ``X @ theta[:-1] + intercept_scaling * theta[-1]``; the
Frobenius penalty ``||theta||^2 / (2 beta)`` covers the bias row too.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError
from .optimize import OptimizerConfig, minimize_convex
from .special import log_sum_exp


def check_labels(labels, num_classes=None, n=None):
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValidationError("labels must be a 1-d vector")
    if n is not None and y.shape[0] != n:
        raise ValidationError(f"expected {n} labels, got {y.shape[0]}")
    if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValidationError("labels must be integers")
    y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ValidationError("labels must be non-negative")
    if num_classes is None:
        num_classes = int(y.max()) + 1 if y.size else 0
    if y.size and y.max() >= num_classes:
        raise ValidationError(
            f"label {int(y.max())} out of range for {num_classes} classes"
        )
    return y, int(num_classes)


def logits(features, theta, intercept_scaling=1.0):
    return features @ theta[:-1] + intercept_scaling * theta[-1]


def empirical_risk(features, labels, theta, intercept_scaling=1.0):
    """Mean cross-entropy of the linear softmax model."""
    g = logits(np.asarray(features, dtype=np.float64), theta, intercept_scaling)
    y = np.asarray(labels, dtype=np.int64)
    return float(np.mean(log_sum_exp(g, axis=1) - g[np.arange(len(y)), y]))


def softmax_objective(features, labels, num_classes, beta, intercept_scaling=1.0):
    """Return ``f(theta_flat) -> (value, grad)`` of the regularized risk."""
    X = np.asarray(features, dtype=np.float64)
    n, d = X.shape
    y = np.asarray(labels, dtype=np.int64)
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), y] = 1.0
    shape = (d + 1, num_classes)

    def objective(flat):
        theta = flat.reshape(shape)
        g = X @ theta[:-1] + intercept_scaling * theta[-1]
        lse = log_sum_exp(g, axis=1, keepdims=True)
        risk = np.mean(lse[:, 0] - np.sum(onehot * g, axis=1))
        resid = (np.exp(g - lse) - onehot) / n
        grad = np.empty(shape)
        grad[:-1] = X.T @ resid
        grad[-1] = intercept_scaling * resid.sum(axis=0)
        value = risk + (flat @ flat) / (2.0 * beta)
        grad += theta / beta
        return value, grad.ravel()

    return objective


@dataclass
class SoftmaxFit:
    theta: np.ndarray
    loss: float
    risk: float
    converged: bool
    iterations: int
    gradient_norm: float
    n_evaluations: int = 0


def fit_l2_softmax(
    features,
    labels,
    beta,
    num_classes=None,
    intercept_scaling=1.0,
    config=None,
):
    """Fit the L2-regularized softmax classifier from a zero start.

    Parameters
    ----------
    features : (N, D) array_like
    labels : (N,) int array_like
    beta : float
        Inverse regularization strength; the penalty is
        ``||theta||_F^2 / (2 beta)``.
    num_classes : int, optional
        Defaults to ``max(labels) + 1``.
    intercept_scaling : float
        Value of the synthetic constant feature multiplying the bias row.
    config : OptimizerConfig, optional

    Returns
    -------
    SoftmaxFit
        ``loss`` is the full regularized objective at the returned
        ``theta``; ``risk`` its cross-entropy part.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("features must be an (N, D) matrix")
    if X.shape[0] < 1:
        raise ValidationError("need at least one example")
    y, k = check_labels(labels, num_classes, n=X.shape[0])
    if not beta > 0:
        raise ValidationError("beta must be positive")
    objective = softmax_objective(X, y, k, beta, intercept_scaling)
    res = minimize_convex(
        objective, np.zeros((X.shape[1] + 1) * k), config or OptimizerConfig()
    )
    theta = res.argmin.reshape(X.shape[1] + 1, k)
    risk = empirical_risk(X, y, theta, intercept_scaling)
    return SoftmaxFit(
        theta=theta,
        loss=float(res.value),
        risk=risk,
        converged=bool(res.converged),
        iterations=res.iterations,
        gradient_norm=res.gradient_norm,
        n_evaluations=res.n_evaluations,
    )
