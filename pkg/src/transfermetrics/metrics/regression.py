"""Feature-based baselines: H-score, LogME, LINEAR and LINEAR-VALID."""

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ValidationError
from ..numerics.linear import fit_l2_softmax, logits
from .base import MetricResult, as_feature_set

PINV_RELATIVE_THRESHOLD = 1e-10
DEFAULT_BETA_FACTORS = (0.1, 1.0, 10.0)


def thresholded_pinv(sym):
    evals, evecs = np.linalg.eigh(sym)
    top = evals.max() if evals.size else 0.0
    if top <= 0:
        return np.zeros_like(sym)
    keep = evals > PINV_RELATIVE_THRESHOLD * top
    return (evecs[:, keep] / evals[keep]) @ evecs[:, keep].T


def h_score(features, labels=None, num_classes=None):
    """``trace(pinv(cov(f)) cov(E[f | y]))`` with 1/N covariances."""
    fs = as_feature_set(features, labels, num_classes)
    X, y = fs.features, fs.labels
    if fs.n < 2:
        raise ValidationError("h_score needs N >= 2")
    counts = np.bincount(y, minlength=fs.num_classes)
    absent = np.nonzero(counts == 0)[0]
    if absent.size:
        raise ValidationError(f"classes absent from the sample: {absent.tolist()}")
    mu = X.mean(axis=0)
    centered = X - mu
    cov_f = centered.T @ centered / fs.n
    class_means = np.zeros((fs.num_classes, fs.d))
    np.add.at(class_means, y, X)
    class_means /= counts[:, None]
    dev = class_means - mu
    cov_b = (dev * (counts / fs.n)[:, None]).T @ dev
    score = float(np.trace(thresholded_pinv(cov_f) @ cov_b))
    return MetricResult("hscore", score, {})


@dataclass
class LogmeState:
    alpha: float
    beta_noise: float
    evidence: float
    iterations: int
    converged: bool
    evidence_trace: list = field(default_factory=list)
    em_steps: int = 0


def _logme_evidence(n, d, s2, z, y_sq, alpha, beta):
    """Log evidence of ``y`` and its sufficient statistics in SVD coordinates."""
    denom = alpha + beta * s2
    m_sq = np.sum((beta * np.sqrt(s2) * z / denom) ** 2)
    res = np.sum((z * alpha / denom) ** 2) + max(y_sq - np.sum(z**2), 0.0)
    logdet = np.sum(np.log(denom)) + (d - s2.size) * np.log(alpha)
    ev = (
        0.5 * d * np.log(alpha)
        + 0.5 * n * np.log(beta)
        - 0.5 * n * np.log(2 * np.pi)
        - 0.5 * beta * res
        - 0.5 * alpha * m_sq
        - 0.5 * logdet
    )
    return ev, m_sq, res


def logme_single(s2, u, y, d, max_iter=100, tol=1e-6):
    """Maximize the Gaussian evidence of one target column over (alpha, beta)."""
    n = y.size
    z = u.T @ y
    y_sq = float(y @ y)
    tiny = 1e-12 * max(y_sq, 1.0)
    alpha, beta = 1.0, 1.0
    ev, m_sq, res = _logme_evidence(n, d, s2, z, y_sq, alpha, beta)
    trace = [ev]
    converged = False
    it = 0
    em_steps = 0
    for it in range(1, max_iter + 1):
        denom = alpha + beta * s2
        gamma = np.sum(beta * s2 / denom)
        new_alpha = max(gamma / max(m_sq, tiny), 1e-300)
        new_beta = max((n - gamma) / max(res, tiny), 1e-300)
        cand = _logme_evidence(n, d, s2, z, y_sq, new_alpha, new_beta)
        if cand[0] < ev:
            # MacKay's step overshot; the EM step cannot decrease the evidence
            tr_inv = np.sum(1.0 / denom) + (d - s2.size) / alpha
            new_alpha = d / (m_sq + tr_inv)
            new_beta = n / (res + np.sum(s2 / denom))
            cand = _logme_evidence(n, d, s2, z, y_sq, new_alpha, new_beta)
            em_steps += 1
        d_alpha = abs(new_alpha - alpha) / alpha
        d_beta = abs(new_beta - beta) / beta
        alpha, beta = new_alpha, new_beta
        ev, m_sq, res = cand
        trace.append(ev)
        if d_alpha < tol and d_beta < tol:
            converged = True
            break
    return LogmeState(float(alpha), float(beta), float(ev), it, converged, trace, em_steps)


def logme_score(features, labels=None, num_classes=None, max_iter=100, tol=1e-6):
    """Mean over classes of the per-sample maximized log evidence.

    Each class contributes the one-hot indicator column as a regression
    target with prior ``w ~ N(0, I / alpha)`` and noise precision ``beta``.
    Classes with no examples are skipped.
    """
    fs = as_feature_set(features, labels, num_classes)
    if fs.n < 2:
        raise ValidationError("logme_score needs N >= 2")
    u, s, _ = np.linalg.svd(fs.features, full_matrices=False)
    s2 = s**2
    states = []
    skipped = []
    for k in range(fs.num_classes):
        target = (fs.labels == k).astype(np.float64)
        if not target.any():
            skipped.append(k)
            continue
        states.append(logme_single(s2, u, target, fs.d, max_iter, tol))
    if not states:
        raise ValidationError("no class has any example")
    per_class = [st.evidence / fs.n for st in states]
    return MetricResult(
        "logme",
        float(np.mean(per_class)),
        {
            "per_class_evidence": per_class,
            "alpha": [st.alpha for st in states],
            "beta_noise": [st.beta_noise for st in states],
            "iterations": [st.iterations for st in states],
            "converged": all(st.converged for st in states),
            "skipped_classes": skipped,
        },
    )


def linear_metric(features, labels=None, beta=None, num_classes=None, config=None):
    """Regularized training loss of the linear softmax probe."""
    fs = as_feature_set(features, labels, num_classes)
    if beta is None:
        raise ValidationError("linear_metric needs beta")
    fit = fit_l2_softmax(fs.features, fs.labels, beta, fs.num_classes, config=config)
    return MetricResult(
        "linear",
        fit.loss,
        {"beta": beta, "risk": fit.risk, "converged": fit.converged, "iterations": fit.iterations},
    )


def stratified_halves(labels, seed=0):
    """Split indices into two folds, alternating within shuffled classes."""
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold_a, fold_b = [], []
    toggle = 0
    for c in np.unique(y):
        for idx in rng.permutation(np.nonzero(y == c)[0]):
            (fold_a if toggle == 0 else fold_b).append(idx)
            toggle ^= 1
    return np.sort(np.asarray(fold_a, dtype=np.int64)), np.sort(np.asarray(fold_b, dtype=np.int64))


def linear_valid_metric(
    features,
    labels=None,
    beta_grid=None,
    seed=0,
    num_classes=None,
    intercept_scaling=1.0,
    config=None,
):
    """Held-out 0-1 error of the best probe over ``beta_grid``.

    The grid defaults to ``{0.1, 1, 10} * N``. Ties go to the smaller beta.
    ``score`` is the validation error; ``diagnostics["chosen_beta"]`` the
    selected beta.
    """
    fs = as_feature_set(features, labels, num_classes)
    if fs.n < 2:
        raise ValidationError("linear_valid_metric needs N >= 2")
    if beta_grid is None:
        beta_grid = [f * fs.n for f in DEFAULT_BETA_FACTORS]
    beta_grid = sorted(float(b) for b in beta_grid)
    if not beta_grid or min(beta_grid) <= 0:
        raise ValidationError("beta_grid must hold positive values")
    fold_a, fold_b = stratified_halves(fs.labels, seed)
    present = np.unique(fs.labels)
    missing_a = np.setdiff1d(present, fs.labels[fold_a]).tolist()
    missing_b = np.setdiff1d(present, fs.labels[fold_b]).tolist()
    errors = []
    for beta in beta_grid:
        fit = fit_l2_softmax(
            fs.features[fold_a],
            fs.labels[fold_a],
            beta,
            fs.num_classes,
            intercept_scaling=intercept_scaling,
            config=config,
        )
        pred = np.argmax(logits(fs.features[fold_b], fit.theta, intercept_scaling), axis=1)
        errors.append(float(np.mean(pred != fs.labels[fold_b])))
    best = int(np.argmin(errors))
    return MetricResult(
        "linear_valid",
        errors[best],
        {
            "chosen_beta": beta_grid[best],
            "errors": dict(zip(beta_grid, errors)),
            "n_fits": len(beta_grid),
            "fold_sizes": [int(fold_a.size), int(fold_b.size)],
            "classes_missing_from_train_fold": missing_a,
            "classes_missing_from_valid_fold": missing_b,
        },
    )
