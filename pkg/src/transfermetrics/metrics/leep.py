"""Source-head metrics: LEEP, NCE and the Gaussian-mixture variant N-LEEP."""

import numpy as np

from ..numerics.decomposition import pca_fit
from ..numerics.mixture import gmm_fit, gmm_posterior
from ..numerics.special import log_sum_exp
from .base import MetricResult, as_feature_set, as_probs, labels_and_k


def leep_conditional(probs, labels, num_classes=None, return_empty=False):
    """Empirical conditional ``p(y | z)`` as a ``(K, |Z|)`` matrix.

    Source classes that receive no mass get the uniform ``1/K`` column.
    """
    y, k = labels_and_k(labels, num_classes, n=None)
    M = as_probs(probs, n=y.size, require_normalized=True)
    n = y.size
    joint = np.zeros((k, M.shape[1]))
    np.add.at(joint, y, M)
    joint /= n
    marginal = joint.sum(axis=0)
    empty = marginal <= 0
    cond = np.full_like(joint, 1.0 / k)
    cond[:, ~empty] = joint[:, ~empty] / marginal[~empty]
    if return_empty:
        return cond, np.nonzero(empty)[0]
    return cond


def leep_score(probs, labels, num_classes=None):
    """Average log-likelihood of the expected empirical predictor."""
    y, k = labels_and_k(labels, num_classes, n=None)
    M = as_probs(probs, n=y.size, require_normalized=True)
    cond, empty = leep_conditional(M, y, k, return_empty=True)
    with np.errstate(divide="ignore"):
        log_terms = np.log(cond[y]) + np.log(M)
    per_example = log_sum_exp(log_terms, axis=1)
    score = float(np.mean(per_example))
    return MetricResult(
        "leep",
        score,
        {
            "empty_source_classes": empty.tolist(),
            "degenerate": bool(np.isneginf(score)),
        },
    )


def nce_score(probs, labels, num_classes=None):
    """Negative conditional entropy ``-H(Y | Z)`` with ``z_i = argmax M(x_i)``."""
    y, k = labels_and_k(labels, num_classes, n=None)
    M = as_probs(probs, n=y.size)
    z = np.argmax(M, axis=1)
    joint = np.zeros((M.shape[1], k))
    np.add.at(joint, (z, y), 1.0)
    joint /= y.size
    pz = joint.sum(axis=1, keepdims=True)
    nz = joint > 0
    cond = np.divide(joint, pz, out=np.ones_like(joint), where=pz > 0)
    h = -np.sum(joint[nz] * np.log(cond[nz]))
    return MetricResult("nce", float(-h), {})


def gmm_source_distribution(features, energy_fraction=0.8, num_components=None, seed=0):
    """PCA-reduce, fit a GMM and return ``(posteriors, diagnostics)``."""
    fs = features
    k = num_components if num_components is not None else fs.num_classes
    pca = pca_fit(fs.features, energy_fraction)
    reduced = pca.transform(fs.features)
    gmm = gmm_fit(reduced, k, seed=seed)
    post = gmm_posterior(gmm, reduced)
    diag = {
        "pca_dim": pca.n_components,
        "pca_energy": pca.explained_energy_fraction,
        "pca_degenerate": pca.degenerate,
        "gmm_log_likelihood": gmm.log_likelihood,
        "gmm_converged": gmm.converged,
        "gmm_iterations": gmm.n_iter,
        "num_components": k,
        "max_row_sum_error": float(np.max(np.abs(post.sum(axis=1) - 1.0))),
    }
    return post, diag


def nleep_score(features, labels=None, energy_fraction=0.8, num_components=None, seed=0):
    """LEEP with GMM cluster posteriors in place of source-head outputs."""
    fs = as_feature_set(features, labels)
    post, diag = gmm_source_distribution(fs, energy_fraction, num_components, seed)
    res = leep_score(post, fs.labels, fs.num_classes)
    diag.update(res.diagnostics)
    return MetricResult("nleep", res.score, diag)
