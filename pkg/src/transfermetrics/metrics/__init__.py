from .base import MetricResult
from .leep import gmm_source_distribution, leep_conditional, leep_score, nce_score, nleep_score
from .oracles import (
    exact_log_evidence_dirichlet,
    finite_difference_gradient,
    finite_difference_hessian_trace,
    mc_log_evidence_gamma,
    mc_perturbed_risk_gap,
)
from .pactran import (
    DirichletState,
    GammaState,
    GaussResult,
    default_prior,
    pactran_dirichlet,
    pactran_gamma,
    pactran_gaussian,
    trace_hessian_ce,
)
from .regression import (
    LogmeState,
    h_score,
    linear_metric,
    linear_valid_metric,
    logme_score,
    stratified_halves,
)

__all__ = [
    "DirichletState",
    "GammaState",
    "GaussResult",
    "LogmeState",
    "MetricResult",
    "default_prior",
    "exact_log_evidence_dirichlet",
    "finite_difference_gradient",
    "finite_difference_hessian_trace",
    "gmm_source_distribution",
    "h_score",
    "leep_conditional",
    "leep_score",
    "linear_metric",
    "linear_valid_metric",
    "logme_score",
    "mc_log_evidence_gamma",
    "mc_perturbed_risk_gap",
    "nce_score",
    "nleep_score",
    "pactran_dirichlet",
    "pactran_gamma",
    "pactran_gaussian",
    "stratified_halves",
    "trace_hessian_ce",
]
