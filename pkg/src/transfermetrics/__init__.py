"""Transferability metrics for ranking pretrained checkpoints."""

from .data import (
    CheckpointEntry,
    CheckpointManifest,
    FeatureSet,
    SourceDistribution,
    SubsampleSpec,
    load_labels,
    load_tensor,
    save_tensor,
    stratified_subsample,
    subsample_indices,
    validate_dataset,
)
from .estimators import EnergyPCA, GaussianMixtureEM, L2SoftmaxClassifier, TransferabilityScorer
from .exceptions import DomainError, FormatError, NumericalError, ValidationError
from .harness import MetricConfig, SyntheticSpec, evaluate_ranking, generate_synthetic_benchmark, run_metrics
from .metrics import (
    MetricResult,
    h_score,
    leep_score,
    linear_metric,
    linear_valid_metric,
    logme_score,
    nce_score,
    nleep_score,
    pactran_dirichlet,
    pactran_gamma,
    pactran_gaussian,
    trace_hessian_ce,
)
from .numerics import fit_l2_softmax, kendall_tau

__version__ = "0.1.0"
