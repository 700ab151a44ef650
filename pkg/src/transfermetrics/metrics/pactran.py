"""PAC-Bayesian transferability metrics (Dirichlet, Gamma and Gaussian priors).

All three scores are upper bounds on a generalization loss, so lower is
better. The Dirichlet and Gamma variants run mean-field coordinate ascent on
the latent source assignments; the Gaussian variant fits an L2 softmax probe
and adds a flatness term built from the closed-form Hessian trace.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp

from ..exceptions import ValidationError
from ..numerics.linear import check_labels, fit_l2_softmax, logits
from ..numerics.special import log_softmax
from .base import as_probs

ARG_FLOOR = 1e-12
MAX_HALVINGS = 10


def default_prior(labels, num_classes):
    """Empirical label frequencies floored at ``1 / (10 N)``."""
    y = np.asarray(labels, dtype=np.int64)
    freq = np.bincount(y, minlength=num_classes) / y.size
    return np.maximum(freq, 1.0 / (10.0 * y.size))


def _prior(prior, labels, k):
    if prior is None:
        return default_prior(labels, k)
    prior = np.asarray(prior, dtype=np.float64).ravel()
    if prior.shape != (k,):
        raise ValidationError(f"prior must have {k} entries, got {prior.shape}")
    if not np.all(np.isfinite(prior)) or np.any(prior <= 0):
        raise ValidationError("prior entries must be positive and finite")
    return prior


class _Clamp:
    """Floors special-function arguments and remembers whether it had to."""

    def __init__(self):
        self.hit = False

    def __call__(self, x):
        if np.any(x < ARG_FLOOR):
            self.hit = True
            return np.maximum(x, ARG_FLOOR)
        return x


def _entropy_term(q, log_m):
    """``sum q (log q - log M)`` with ``0 log 0 = 0``."""
    pos = q > 0
    return float(np.sum(q[pos] * (np.log(q[pos]) - log_m[pos])))


def _log(m):
    with np.errstate(divide="ignore"):
        return np.log(m)


@dataclass
class DirichletState:
    q: np.ndarray
    alpha_tilde: np.ndarray
    alpha_prior: np.ndarray
    elbo_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    clamped: bool = False


def _log_c(a, lg):
    """``log Gamma(sum_y a_yz) - sum_y log Gamma(a_yz)`` for each column z."""
    return lg(a.sum(axis=0)) - lg(a).sum(axis=0)


def pactran_dirichlet(probs, labels, num_classes=None, alpha_prior=None, max_iters=10, tol=1e-6):
    """Negative optimal ELBO under a Dirichlet prior on the label map.

    Parameters
    ----------
    probs : (N, |Z|) array_like or SourceDistribution
        Row-normalized source-head outputs.
    labels : (N,) int array_like
    num_classes : int, optional
    alpha_prior : (K,) array_like, optional
        Defaults to the floored empirical label frequencies.
    max_iters : int
        Number of (q, alpha_tilde) sweeps.
    tol : float
        Stop once a sweep raises the ELBO by less than this.

    Returns
    -------
    score : float
    state : DirichletState
    """
    y, k = check_labels(labels, num_classes)
    M = as_probs(probs, n=y.size, require_normalized=True)
    alpha = _prior(alpha_prior, y, k)
    clamp = _Clamp()
    lg = lambda a: _sp.gammaln(clamp(a))  # noqa: E731
    psi = lambda a: _sp.psi(clamp(a))  # noqa: E731

    log_m = _log(M)
    onehot = np.zeros((y.size, k))
    onehot[np.arange(y.size), y] = 1.0
    prior_cols = np.repeat(alpha[:, None], M.shape[1], axis=1)
    log_c_prior = _log_c(prior_cols, lg)

    def update_alpha(q):
        return prior_cols + onehot.T @ q

    def elbo(q, at):
        return float(np.sum(log_c_prior - _log_c(at, lg))) - _entropy_term(q, log_m)

    q = M / M.sum(axis=1, keepdims=True)
    at = update_alpha(q)
    trace = [elbo(q, at)]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        e_log_w = psi(at) - psi(at.sum(axis=0))
        q = np.exp(log_softmax(log_m + e_log_w[y], axis=1))
        at = update_alpha(q)
        trace.append(elbo(q, at))
        if trace[-1] - trace[-2] < tol:
            converged = True
            break
    state = DirichletState(q, at, alpha, trace, it, converged, clamp.hit)
    return -trace[-1], state


@dataclass
class GammaState:
    q: np.ndarray
    a_tilde: np.ndarray
    a_prior: np.ndarray
    lambda_tilde: np.ndarray
    b: float = 1.0
    elbo_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    clamped: bool = False
    damped_sweeps: int = 0


def pactran_gamma(probs, labels, num_classes=None, a_prior=None, max_iters=10, tol=1e-6):
    """Negative ELBO under Gamma priors with exponential augmentation.

    Source outputs only need to be non-negative with positive row sums. The
    Gamma rate is fixed at 1 because the scale cancels in the likelihood.

    Returns
    -------
    score : float
    state : GammaState
    """
    y, k = check_labels(labels, num_classes)
    M = as_probs(probs, n=y.size)
    row_sum = M.sum(axis=1)
    if np.any(row_sum <= 0):
        raise ValidationError(f"all-zero probability rows: {np.nonzero(row_sum <= 0)[0].tolist()}")
    a = _prior(a_prior, y, k)
    clamp = _Clamp()
    lg = lambda v: _sp.gammaln(clamp(v))  # noqa: E731
    psi = lambda v: _sp.psi(clamp(v))  # noqa: E731

    log_m = _log(M)
    onehot = np.zeros((y.size, k))
    onehot[np.arange(y.size), y] = 1.0
    prior_cells = np.repeat(a[:, None], M.shape[1], axis=1)
    lg_prior = float(np.sum(lg(prior_cells)))

    def update(q):
        at = prior_cells + onehot.T @ q
        return at, M @ at.sum(axis=0)

    def elbo(q, at, lam):
        return (
            float(np.sum(lg(at))) - lg_prior
            - float(np.sum(np.log(lam)))
            - _entropy_term(q, log_m)
        )

    q = M / row_sum[:, None]
    at, lam = update(q)
    trace = [elbo(q, at, lam)]
    converged = False
    it = 0
    damped = 0
    for it in range(1, max_iters + 1):
        q_star = np.exp(log_softmax(log_m + psi(at)[y], axis=1))
        # The shape update a + n(q) is not the exact block optimum when the
        # rate is pinned at 1, so a full step can lower the ELBO; halve it
        # until the bound does not get worse.
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            q_try = q + step * (q_star - q) if step < 1.0 else q_star
            at_try, lam_try = update(q_try)
            value = elbo(q_try, at_try, lam_try)
            if value >= trace[-1]:
                break
            step *= 0.5
        else:
            converged = True
            break
        damped += step < 1.0
        q, at, lam = q_try, at_try, lam_try
        trace.append(value)
        if trace[-1] - trace[-2] < tol:
            converged = True
            break
    state = GammaState(q, at, a, lam, 1.0, trace, it, converged, clamp.hit, damped)
    return -trace[-1], state


def trace_hessian_ce(features, labels, theta, intercept_scaling=1.0):
    """Trace of the Hessian of the mean cross-entropy at ``theta``.

    Only the diagonal second derivatives are needed, and for softmax they
    reduce to ``x_ij^2 (s_ik - s_ik^2)`` averaged over examples, so the cost
    is O(NKD).
    """
    X = np.asarray(features, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if X.ndim != 2 or theta.shape[0] != X.shape[1] + 1:
        raise ValidationError(
            f"theta shape {theta.shape} inconsistent with features {X.shape}"
        )
    if labels is not None and np.asarray(labels).shape[0] != X.shape[0]:
        raise ValidationError("labels and features disagree on N")
    s = np.exp(log_softmax(logits(X, theta, intercept_scaling), axis=1))
    var = np.sum(s - s * s, axis=1)
    sq_norm = np.sum(X * X, axis=1) + intercept_scaling**2
    return float(np.mean(sq_norm * var))


@dataclass
class GaussResult:
    theta_star: np.ndarray
    rer: float
    fr: float
    metric: float
    sigma_ratio: float
    trace_hessian: float
    hparams: dict
    converged: bool = True
    iterations: int = 0
    n_evaluations: int = 0

    @property
    def sigma_star_sq(self):
        return self.hparams["sigma0_sq"] / self.sigma_ratio


def pactran_gaussian(features, labels, num_classes=None, beta=None, sigma0_sq=None, fit=None, config=None):
    """Regularized empirical risk plus the flatness regularizer.

    ``theta*`` minimizes the L2-regularized cross-entropy (the flatness term
    is left out of the optimization). With ``D_eff = D + 1`` counting the
    bias,

        sigma0^2 / sigma*^2 = 1 + beta / (K D_eff) * Tr(H(theta*))
        FR = K D_eff sigma0^2 / (2 beta) * log(sigma0^2 / sigma*^2)

    and the score is ``RER + FR``.

    Parameters
    ----------
    fit : SoftmaxFit, optional
        A fit for the same (features, labels, beta); lets a sigma0 grid reuse
        one optimization.

    Returns
    -------
    score : float
    result : GaussResult
    """
    X = np.asarray(features, dtype=np.float64)
    y, k = check_labels(labels, num_classes, n=X.shape[0])
    if beta is None or sigma0_sq is None or not (beta > 0 and sigma0_sq > 0):
        raise ValidationError("beta and sigma0_sq must be positive")
    if fit is None:
        fit = fit_l2_softmax(X, y, beta, k, config=config)
    d_eff = X.shape[1] + 1
    kd = k * d_eff
    tr_h = trace_hessian_ce(X, y, fit.theta)
    ratio = 1.0 + beta / kd * tr_h
    rer = fit.loss
    fr = kd * sigma0_sq / (2.0 * beta) * np.log(ratio)
    score = rer + fr
    result = GaussResult(
        theta_star=fit.theta,
        rer=rer,
        fr=float(fr),
        metric=float(score),
        sigma_ratio=float(ratio),
        trace_hessian=tr_h,
        hparams={"beta": float(beta), "sigma0_sq": float(sigma0_sq), "lambda": float(beta / sigma0_sq)},
        converged=fit.converged,
        iterations=fit.iterations,
        n_evaluations=fit.n_evaluations,
    )
    return float(score), result
