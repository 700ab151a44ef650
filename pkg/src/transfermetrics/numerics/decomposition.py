"""Principal component analysis by eigen-decomposition of the covariance."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_energy_fraction: float
    eigenvalues: np.ndarray
    degenerate: bool = False

    @property
    def n_components(self):
        return self.components.shape[0]

    def transform(self, features):
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.shape[0]:
            raise ValidationError("feature dimension does not match the PCA model")
        return (X - self.mean) @ self.components.T


def pca_fit(features, energy_fraction=0.8):
    """Keep the fewest leading components carrying ``energy_fraction`` of variance.

    Zero total variance yields a single arbitrary unit component and
    ``degenerate=True``.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("pca_fit needs an (N, d) matrix with N >= 2")
    if not 0.0 < energy_fraction <= 1.0:
        raise ValidationError("energy_fraction must lie in (0, 1]")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / X.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    if total <= 0.0:
        comp = np.zeros((1, X.shape[1]))
        comp[0, 0] = 1.0
        return PcaModel(mean, comp, 1.0, evals, degenerate=True)
    frac = np.cumsum(evals) / total
    # the top-d sum can round to just below 1.0 when d = full rank
    d = int(np.searchsorted(frac, energy_fraction - 1e-12) + 1)
    d = min(d, X.shape[1])
    comps = evecs[:, :d].T.copy()
    # deterministic sign: largest-magnitude coordinate positive
    signs = np.sign(comps[np.arange(d), np.argmax(np.abs(comps), axis=1)])
    comps *= signs[:, None]
    return PcaModel(mean, comps, float(min(frac[d - 1], 1.0)), evals)
