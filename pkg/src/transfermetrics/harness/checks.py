"""Seeded oracle checks shared by the command line and the test suite.

Each check draws small random instances, compares a metric against its
independent oracle and returns one record per instance.
"""

from typing import NamedTuple

import numpy as np

from ..metrics.oracles import (
    exact_log_evidence_dirichlet,
    finite_difference_gradient,
    finite_difference_hessian_trace,
    mc_log_evidence_gamma,
)
from ..metrics.pactran import pactran_dirichlet, pactran_gamma, trace_hessian_ce
from ..numerics.linear import softmax_objective


class CheckRecord(NamedTuple):
    instance: int
    value: float
    reference: float
    slack: float
    ok: bool


def source_instance(rng, max_n=8, num_sources=2, classes=(2, 3)):
    """Random (probs, labels, K) with N <= max_n."""
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.choice(classes))
    probs = rng.dirichlet(np.ones(num_sources), size=n)
    labels = rng.integers(0, k, size=n)
    return probs, labels, k


def probe_instance(rng, n=30, d=4, k=3, scale=1.0):
    """Random (features, labels, theta) for derivative checks."""
    X = rng.standard_normal((n, d))
    y = rng.integers(0, k, size=n)
    theta = scale * rng.standard_normal((d + 1, k))
    return X, y, theta


def check_dirichlet_bound(num_instances=200, seed=0, tol=1e-8):
    """PT-Dirichlet score must not undercut the exact negative log evidence."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(num_instances):
        probs, labels, k = source_instance(rng)
        score, _ = pactran_dirichlet(probs, labels, k)
        neg_log_z = -exact_log_evidence_dirichlet(probs, labels, k)
        slack = score - neg_log_z
        records.append(CheckRecord(i, score, neg_log_z, slack, slack >= -tol))
    return records


def check_gamma_bound(num_instances=50, seed=0, num_samples=20_000, num_se=3.0):
    """PT-Gamma score against a Monte-Carlo negative log evidence."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(num_instances):
        probs, labels, k = source_instance(rng, max_n=6)
        score, _ = pactran_gamma(probs, labels, k)
        est, se = mc_log_evidence_gamma(probs, labels, k, num_samples=num_samples, seed=seed + i)
        slack = score - (-est) + num_se * se
        records.append(CheckRecord(i, score, -est, slack, slack >= 0.0))
    return records


def _relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_gradient(num_instances=20, seed=0, tol=1e-5, step=1e-6):
    """Analytic gradient of the regularized risk against central differences."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(num_instances):
        X, y, theta = probe_instance(rng)
        beta = float(rng.uniform(0.5, 50.0))
        f = softmax_objective(X, y, theta.shape[1], beta)
        _, grad = f(theta.ravel())
        fd = finite_difference_gradient(lambda t: f(t)[0], theta.ravel(), step)
        err = _relative_error(grad, fd)
        records.append(CheckRecord(i, err, tol, tol - err, err <= tol))
    return records


def check_hessian_trace(num_instances=20, seed=0, tol=1e-4, step=1e-3):
    """Closed-form Hessian trace against second central differences."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(num_instances):
        X, y, theta = probe_instance(rng)
        exact = trace_hessian_ce(X, y, theta)
        fd = finite_difference_hessian_trace(X, y, theta, step)
        err = abs(exact - fd) / max(abs(fd), 1e-300)
        records.append(CheckRecord(i, err, tol, tol - err, err <= tol))
    return records


ORACLE_CHECKS = {
    "dirichlet-exact": check_dirichlet_bound,
    "gamma-mc": check_gamma_bound,
    "gradient-fd": check_gradient,
    "hessian-fd": check_hessian_trace,
}
