from .config import ALL_METRICS, SOURCE_METRICS, WORKERS_ENV, MetricConfig, SyntheticSpec
from .evaluate import (
    Selection,
    evaluate_ranking,
    format_evaluation_table,
    robust_std,
    select_hparams_via_linear_valid,
    std_ratio,
    std_ratio_csv,
)
from .run import dump_report, load_report, pair_key, run_metrics
from .synthetic import generate_synthetic_benchmark

__all__ = [
    "ALL_METRICS",
    "MetricConfig",
    "SOURCE_METRICS",
    "Selection",
    "SyntheticSpec",
    "WORKERS_ENV",
    "dump_report",
    "evaluate_ranking",
    "format_evaluation_table",
    "generate_synthetic_benchmark",
    "load_report",
    "pair_key",
    "robust_std",
    "run_metrics",
    "select_hparams_via_linear_valid",
    "std_ratio",
    "std_ratio_csv",
]
