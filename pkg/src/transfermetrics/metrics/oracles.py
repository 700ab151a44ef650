"""Independent reference computations used to certify the metrics.

These share no code with the variational or closed-form paths they check:
exact enumeration of the Dirichlet evidence, Monte-Carlo estimates of the
Gamma evidence and of the perturbed risk, and finite differences.
"""

import numpy as np
from scipy import special as _sp

from ..exceptions import ValidationError
from ..numerics.linear import check_labels, empirical_risk
from .base import as_probs
from .pactran import default_prior

MAX_CONFIGURATIONS = 10**6


def _log_c(a):
    return _sp.gammaln(a.sum(axis=-1)) - _sp.gammaln(a).sum(axis=-1)


def exact_log_evidence_dirichlet(probs, labels, num_classes=None, alpha_prior=None, chunk=1 << 15):
    """``log Z(S)`` by summing over all ``|Z|^N`` source assignments."""
    y, k = check_labels(labels, num_classes)
    M = as_probs(probs, n=y.size)
    n, nz = M.shape
    alpha = default_prior(y, k) if alpha_prior is None else np.asarray(alpha_prior, float)
    counts_total = np.bincount(y, minlength=k).astype(float)
    if nz == 1:
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(M[:, 0])) + _log_c(alpha) - _log_c(alpha + counts_total))
    total = nz**n
    if total > MAX_CONFIGURATIONS:
        raise ValidationError(
            f"enumeration needs {nz}^{n} = {total:.3g} configurations (limit {MAX_CONFIGURATIONS})"
        )
    with np.errstate(divide="ignore"):
        log_m = np.log(M)
    radix = nz ** np.arange(n)
    onehot_y = np.eye(k)[y]
    pieces = []
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        cfg = (codes[:, None] // radix) % nz  # (T, N)
        log_lik = log_m[np.arange(n), cfg].sum(axis=1)
        assign = np.eye(nz)[cfg]  # (T, N, Z)
        counts = np.einsum("tnz,nk->tzk", assign, onehot_y)
        term = np.sum(_log_c(alpha) - _log_c(alpha + counts), axis=1)
        pieces.append(log_lik + term)
    vals = np.concatenate(pieces)
    top = vals.max()
    return float(top + np.log(np.sum(np.exp(vals - top))))


def mc_log_evidence_gamma(
    probs, labels, num_classes=None, a_prior=None, num_samples=100_000, seed=0, scale=1.0, chunk=10_000
):
    """Monte-Carlo ``log Z(S)`` for the Gamma-prior model.

    Draws ``V ~ prod Gamma(a_y, scale)`` and averages the normalized
    likelihood ``prod_i p(y_i | x_i, V)``; the augmentation variables are
    integrated out analytically. The standard error is the delta-method
    error of the log of the mean.

    Returns
    -------
    estimate, standard_error : float
    """
    y, k = check_labels(labels, num_classes)
    M = as_probs(probs, n=y.size)
    if num_samples < 1000:
        raise ValidationError("num_samples must be >= 1000")
    a = default_prior(y, k) if a_prior is None else np.asarray(a_prior, float)
    rng = np.random.default_rng(seed)
    shape = np.repeat(a[:, None], M.shape[1], axis=1)
    logs = []
    done = 0
    while done < num_samples:
        t = min(chunk, num_samples - done)
        V = rng.gamma(shape, scale, size=(t,) + shape.shape)  # (T, K, Z)
        num = np.einsum("nz,tnz->tn", M, V[:, y, :])
        den = np.einsum("nz,tkz->tn", M, V)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs.append(np.sum(np.log(num) - np.log(den), axis=1))
        done += t
    ll = np.concatenate(logs)
    ll = np.where(np.isnan(ll), -np.inf, ll)
    top = ll.max()
    if not np.isfinite(top):
        return float("-inf"), float("inf")
    w = np.exp(ll - top)
    mean = w.mean()
    se = w.std(ddof=1) / (np.sqrt(w.size) * mean) if w.size > 1 else 0.0
    return float(top + np.log(mean)), float(se)


def finite_difference_gradient(fun, x, step=1e-6):
    """Central differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        grad[j] = (fun(x + e) - fun(x - e)) / (2 * step)
    return grad


def finite_difference_hessian_trace(features, labels, theta, step=1e-3):
    """Sum of second central differences of the mean cross-entropy."""
    theta = np.asarray(theta, dtype=np.float64)
    base = empirical_risk(features, labels, theta)
    total = 0.0
    for idx in np.ndindex(theta.shape):
        tp = theta.copy()
        tm = theta.copy()
        tp[idx] += step
        tm[idx] -= step
        total += (
            empirical_risk(features, labels, tp) - 2 * base + empirical_risk(features, labels, tm)
        ) / step**2
    return total


def mc_perturbed_risk_gap(features, labels, theta, sigma_sq, num_draws=10_000, seed=0):
    """Estimate ``E[L(theta + sigma eps)] - L(theta)`` over ``eps ~ N(0, I)``.

    Returns
    -------
    mean, standard_error : float
    """
    theta = np.asarray(theta, dtype=np.float64)
    rng = np.random.default_rng(seed)
    base = empirical_risk(features, labels, theta)
    sigma = np.sqrt(sigma_sq)
    gaps = np.array(
        [
            empirical_risk(features, labels, theta + sigma * rng.standard_normal(theta.shape)) - base
            for _ in range(num_draws)
        ]
    )
    return float(gaps.mean()), float(gaps.std(ddof=1) / np.sqrt(num_draws))
