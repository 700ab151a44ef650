"""Special functions and stable reductions.

``log_gamma`` and ``digamma`` wrap :mod:`scipy.special` (Cephes) and add
domain checking; both accept scalars or arrays.
"""

import numpy as np
from scipy import special as _sp

from ..exceptions import DomainError


def _check_positive(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite arguments")
    if np.any(arr <= 0):
        raise DomainError(f"{name} requires positive arguments, got min {arr.min()!r}")
    return arr


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``."""
    arr = _check_positive(x, "log_gamma")
    return _unwrap(x, _sp.gammaln(arr))


def digamma(x):
    """Digamma function (derivative of ``log_gamma``) for ``x > 0``."""
    arr = _check_positive(x, "digamma")
    return _unwrap(x, _sp.psi(arr))


def log_sum_exp(v, axis=None, keepdims=False):
    """Compute ``log(sum(exp(v)))`` with a max shift.

    Rows that are entirely ``-inf`` reduce to ``-inf`` rather than NaN.

    Raises
    ------
    DomainError
        If ``v`` is empty.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise DomainError("log_sum_exp of an empty vector")
    vmax = np.max(v, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(vmax), vmax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - shift), axis=axis, keepdims=True)) + shift
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return float(out) if np.ndim(out) == 0 else out


def softmax(v, axis=-1):
    """Row-wise softmax via :func:`log_sum_exp`."""
    v = np.asarray(v, dtype=np.float64)
    return np.exp(v - log_sum_exp(v, axis=axis, keepdims=True))


def log_softmax(v, axis=-1):
    v = np.asarray(v, dtype=np.float64)
    return v - log_sum_exp(v, axis=axis, keepdims=True)
