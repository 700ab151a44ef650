"""Benchmark configuration objects."""

import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..exceptions import ValidationError

ALL_METRICS = (
    "leep",
    "nce",
    "nleep",
    "hscore",
    "logme",
    "linear",
    "linear_valid",
    "pt_dir",
    "pt_gam",
    "npt_dir",
    "npt_gam",
    "pt_gauss_fix",
    "pt_gauss_grid",
)
# metrics that read the source-head outputs
SOURCE_METRICS = frozenset({"leep", "nce", "pt_dir", "pt_gam"})
WORKERS_ENV = "TRANSFERMETRICS_WORKERS"


@dataclass
class MetricConfig:
    """Metric selection and hyperparameter grids.

    Grid values are factors: beta = factor * N and sigma0^2 = factor / D_eff,
    where D_eff = D + 1 counts the bias.
    """

    metrics: list = field(default_factory=lambda: list(ALL_METRICS))
    beta_factors: tuple = (0.1, 1.0, 10.0)
    sigma0_factors: tuple = (1.0, 10.0, 100.0, 1000.0)
    fix_beta_factor: float = 10.0
    fix_sigma0_factor: float = 100.0
    nleep_energy: float = 0.8
    seed: int = 0
    workers: Optional[int] = None
    max_iterations: int = 500

    def __post_init__(self):
        self.metrics = list(self.metrics)
        unknown = sorted(set(self.metrics) - set(ALL_METRICS))
        if unknown:
            raise ValidationError(f"unknown metrics: {unknown}")
        self.beta_factors = tuple(sorted(float(b) for b in self.beta_factors))
        self.sigma0_factors = tuple(sorted(float(s) for s in self.sigma0_factors))
        if not self.beta_factors or not self.sigma0_factors:
            raise ValidationError("hyperparameter grids must be non-empty")
        if min(self.beta_factors + self.sigma0_factors) <= 0:
            raise ValidationError("grid factors must be positive")
        if self.fix_beta_factor <= 0 or self.fix_sigma0_factor <= 0:
            raise ValidationError("fixed hyperparameters must be positive")

    @property
    def grid(self):
        """(beta_factor, sigma0_factor) pairs, beta ascending then sigma0 ascending."""
        return [(a, b) for a in self.beta_factors for b in self.sigma0_factors]

    def resolved_workers(self):
        if self.workers is not None:
            return max(1, int(self.workers))
        env = os.environ.get(WORKERS_ENV)
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1

    def to_dict(self):
        d = asdict(self)
        d["beta_factors"] = list(self.beta_factors)
        d["sigma0_factors"] = list(self.sigma0_factors)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class SyntheticSpec:
    """Synthetic checkpoint family with strictly increasing feature noise."""

    num_checkpoints: int = 12
    n_train: int = 1000
    n_test: int = 2000
    dim: int = 64
    num_classes: int = 10
    num_sources: int = 32
    noise_levels: Optional[list] = None
    noise_range: tuple = (0.15, 0.7)
    probe_beta_factor: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_levels is None:
            lo, hi = self.noise_range
            step = (hi - lo) / max(self.num_checkpoints - 1, 1)
            self.noise_levels = [lo + i * step for i in range(self.num_checkpoints)]
        self.noise_levels = [float(v) for v in self.noise_levels]
        if len(self.noise_levels) != self.num_checkpoints:
            raise ValidationError("need one noise level per checkpoint")
        if any(b <= a for a, b in zip(self.noise_levels, self.noise_levels[1:])):
            raise ValidationError("noise levels must be strictly increasing")
        if not all(0.0 <= v <= 1.0 for v in self.noise_levels):
            raise ValidationError("noise levels must lie in [0, 1]")
        for name in ("n_train", "n_test", "dim", "num_classes", "num_sources"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["noise_range"] = list(self.noise_range)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "noise_range" in known:
            known["noise_range"] = tuple(known["noise_range"])
        return cls(**known)
