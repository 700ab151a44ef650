from .decomposition import PcaModel, pca_fit
from .linear import SoftmaxFit, empirical_risk, fit_l2_softmax, softmax_objective
from .mixture import GmmModel, gmm_fit, gmm_posterior
from .optimize import OptimizerConfig, OptimizeResult, minimize_convex
from .ranking import kendall_tau
from .special import digamma, log_gamma, log_softmax, log_sum_exp, softmax

__all__ = [
    "GmmModel",
    "OptimizeResult",
    "OptimizerConfig",
    "PcaModel",
    "SoftmaxFit",
    "digamma",
    "empirical_risk",
    "fit_l2_softmax",
    "gmm_fit",
    "gmm_posterior",
    "kendall_tau",
    "log_gamma",
    "log_softmax",
    "log_sum_exp",
    "minimize_convex",
    "pca_fit",
    "softmax",
    "softmax_objective",
]
