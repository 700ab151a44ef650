from dataclasses import dataclass, field

import numpy as np

from ..data import FeatureSet, SourceDistribution
from ..exceptions import ValidationError
from ..numerics.linear import check_labels


@dataclass
class MetricResult:
    """A scalar metric value with its diagnostics."""

    name: str
    score: float
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.score)

    def to_dict(self):
        return {"name": self.name, "score": _jsonable(self.score), "diagnostics": _jsonable(self.diagnostics)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v):
            return None
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def as_probs(probs, n=None, require_normalized=False):
    src = probs if isinstance(probs, SourceDistribution) else SourceDistribution(probs)
    if n is not None and src.probs.shape[0] != n:
        raise ValidationError(
            f"source probabilities have {src.probs.shape[0]} rows, labels have {n}"
        )
    if require_normalized and not src.normalized:
        raise ValidationError("source probabilities must have rows summing to 1")
    return src.probs


def as_feature_set(features, labels=None, num_classes=None):
    if isinstance(features, FeatureSet):
        return features
    if labels is None:
        raise ValidationError("labels are required with a raw feature matrix")
    return FeatureSet(features, labels, num_classes)


def labels_and_k(labels, num_classes, n):
    return check_labels(labels, num_classes, n=n)
