"""Limited-memory BFGS for smooth convex objectives."""

from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ..exceptions import NumericalError, ValidationError

ARMIJO_C1 = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    history_size: int = 10
    line_search_max_steps: int = 20

    def __post_init__(self):
        for name in ("max_iterations", "history_size", "line_search_max_steps"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValidationError("gradient_tolerance must be > 0")


class OptimizeResult(NamedTuple):
    argmin: np.ndarray
    value: float
    converged: bool
    iterations: int
    n_evaluations: int
    gradient_norm: float
    trace: list


def _evaluate(objective, x):
    f, g = objective(x)
    f = float(f)
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericalError("objective or gradient is not finite", point=x.copy())
    return f, g


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((a, rho))
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (a, rho) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize_convex(
    objective: Callable[[np.ndarray], tuple],
    initial_point,
    config: OptimizerConfig = OptimizerConfig(),
) -> OptimizeResult:
    """Minimize a smooth convex function with L-BFGS and Armijo backtracking.

    Parameters
    ----------
    objective : callable
        Maps a 1-d array to ``(value, gradient)``.
    initial_point : array_like
        Starting point; flattened to 1-d.
    config : OptimizerConfig

    Returns
    -------
    OptimizeResult
        ``converged`` is True when the gradient infinity-norm reached
        ``config.gradient_tolerance``. ``trace`` lists the objective at every
        accepted iterate, starting with the initial point.

    Raises
    ------
    NumericalError
        If the objective or its gradient is non-finite at an evaluated point.
    """
    x = np.array(initial_point, dtype=np.float64).ravel()
    f, g = _evaluate(objective, x)
    n_eval = 1
    trace = [f]
    s_hist = deque(maxlen=config.history_size)
    y_hist = deque(maxlen=config.history_size)

    it = 0
    while it < config.max_iterations:
        gnorm = np.max(np.abs(g)) if g.size else 0.0
        if gnorm <= config.gradient_tolerance:
            break
        d = _two_loop(g, s_hist, y_hist)
        slope = g @ d
        if not s_hist or slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = g @ d
            t = min(1.0, 1.0 / gnorm)
        else:
            t = 1.0

        accepted = False
        for _ in range(config.line_search_max_steps):
            x_new = x + t * d
            f_new, g_new = _evaluate(objective, x_new)
            n_eval += 1
            if f_new <= f + ARMIJO_C1 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if s_hist:
                # retry along steepest descent with a fresh history
                s_hist.clear()
                y_hist.clear()
                continue
            break

        s = x_new - x
        y = g_new - g
        if s @ y > 1e-12 * (s @ s):
            s_hist.append(s)
            y_hist.append(y)
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        it += 1

    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return OptimizeResult(
        argmin=x,
        value=f,
        converged=gnorm <= config.gradient_tolerance,
        iterations=it,
        n_evaluations=n_eval,
        gradient_norm=gnorm,
        trace=trace,
    )
