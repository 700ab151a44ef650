"""Pairwise sign-agreement rank correlation."""

import numpy as np

from ..exceptions import ValidationError


def kendall_tau(a, b):
    """Kendall's tau with ties contributing zero.

    ``tau = sum_{i != j} sign(a_i - a_j) sign(b_i - b_j) / (C (C - 1))``.
    Unlike :func:`scipy.stats.kendalltau` (tau-b) there is no tie
    correction, so an all-tied argument gives exactly 0.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {a.size} vs {b.size}")
    c = a.size
    if c < 2:
        raise ValidationError("kendall_tau needs at least 2 entries")
    sa = np.sign(a[:, None] - a[None, :])
    sb = np.sign(b[:, None] - b[None, :])
    return float(np.sum(sa * sb) / (c * (c - 1)))
