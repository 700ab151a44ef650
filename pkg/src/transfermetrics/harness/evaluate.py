"""Hyperparameter selection and ranking evaluation."""

import csv
import io
from typing import NamedTuple

import numpy as np

from ..exceptions import ValidationError
from ..numerics.ranking import kendall_tau

MAD_TO_STD = 1.4826


class Selection(NamedTuple):
    """Outcome of a Kendall-tau driven hyperparameter choice."""

    key: object
    taus: dict
    degenerate: bool


def select_hparams_via_linear_valid(scores_by_hparam, linear_valid_errors):
    """Pick the hyperparameter whose scores best rank-match validation errors.

    Parameters
    ----------
    scores_by_hparam : dict
        Ordered mapping from hyperparameter key to a score vector over
        checkpoints, oriented like errors (lower is better). Iteration order
        is the grid order used to break ties.
    linear_valid_errors : array_like
        LINEAR-VALID validation error per checkpoint.

    Returns
    -------
    Selection
        ``degenerate`` is set when the grid has several entries and they all
        tie, in which case the first grid entry is returned.
    """
    if not scores_by_hparam:
        raise ValidationError("empty hyperparameter grid")
    errors = np.asarray(linear_valid_errors, dtype=np.float64)
    keys = list(scores_by_hparam)
    if len(keys) == 1:
        return Selection(keys[0], {keys[0]: None}, False)
    if errors.size < 2:
        raise ValidationError("selection needs at least 2 checkpoints")
    taus = {}
    for key in keys:
        scores = np.asarray(scores_by_hparam[key], dtype=np.float64)
        if scores.shape != errors.shape:
            raise ValidationError(
                f"score vector for {key!r} has length {scores.size}, expected {errors.size}"
            )
        taus[key] = kendall_tau(scores, errors)
    best = max(taus.values())
    chosen = next(k for k in keys if taus[k] == best)
    degenerate = all(t == best for t in taus.values())
    return Selection(chosen, taus, degenerate)


def robust_std(values):
    """Median absolute deviation scaled to match the normal standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    return float(MAD_TO_STD * np.median(np.abs(v - np.median(v))))


def std_ratio(fr_values, rer_values):
    """Robust spread of the flatness term relative to the risk term."""
    den = robust_std(rer_values)
    num = robust_std(fr_values)
    if den == 0.0:
        return float("inf") if num > 0 else float("nan")
    return num / den


def _finite(value):
    # reports loaded from JSON carry infinities as strings
    if isinstance(value, (int, float)) and np.isfinite(value):
        return float(value)
    return None


def _split_tau(scores, neg_errors):
    pairs = [(s, e) for s, e in zip(scores, neg_errors) if s is not None]
    if len(pairs) < 2:
        return None
    s, e = zip(*pairs)
    return kendall_tau(np.asarray(s, dtype=np.float64), np.asarray(e, dtype=np.float64))


def _mean_se(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return mean, se


def evaluate_ranking(report, manifest):
    """Kendall tau of every metric column against negated test errors.

    Parameters
    ----------
    report : dict
        Output of ``run_metrics``.
    manifest : CheckpointManifest
        Must carry a test error for every checkpoint in the report.

    Returns
    -------
    dict
        ``metrics`` maps metric name to per-split tau, mean and standard
        error; ``std_ratio`` averages the FR/RER spread diagnostic over
        splits for each PT-Gauss hyperparameter pair.
    """
    errors = manifest.test_errors()
    ids = list(report["checkpoints"])
    missing = [c for c in ids if errors.get(c) is None]
    if missing:
        raise ValidationError(f"checkpoints without test error: {missing}")
    neg = [-float(errors[c]) for c in ids]
    metrics = {}
    for name in report["config"]["metrics"]:
        taus = []
        for split in report["splits"]:
            column = split["scores"].get(name, {})
            taus.append(_split_tau([column.get(c) for c in ids], neg))
        mean, se = _mean_se(taus)
        metrics[name] = {"tau_per_split": taus, "mean": mean, "se": se}
    ratios = {}
    for split in report["splits"]:
        for key, value in split.get("std_ratio", {}).items():
            ratios.setdefault(key, []).append(value)
    std_summary = {}
    for key, values in ratios.items():
        finite = [_finite(v) for v in values]
        std_summary[key] = float(np.mean(finite)) if None not in finite else None
    return {"task": report.get("task"), "metrics": metrics, "std_ratio": std_summary}


def _fmt(v, width=8):
    return f"{v:{width}.3f}" if v is not None else f"{'-':>{width}}"


def format_evaluation_table(evaluation):
    """Aligned plain-text table: one row per metric, one column per split."""
    rows = evaluation["metrics"]
    n_splits = max((len(r["tau_per_split"]) for r in rows.values()), default=0)
    name_w = max([len("metric")] + [len(m) for m in rows])
    head = f"{'metric':<{name_w}}" + "".join(f"{'split' + str(i):>8}" for i in range(n_splits))
    head += f"{'mean':>8}{'se':>8}"
    lines = [head, "-" * len(head)]
    for name, r in rows.items():
        cells = "".join(_fmt(t) for t in r["tau_per_split"])
        lines.append(f"{name:<{name_w}}{cells}{_fmt(r['mean'])}{_fmt(r['se'])}")
    return "\n".join(lines)


def std_ratio_csv(report):
    """CSV text with one row per (split, PT-Gauss hyperparameter pair)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["split", "hparams", "std_ratio"])
    for split in report["splits"]:
        for key, value in split.get("std_ratio", {}).items():
            writer.writerow([split["split"], key, "" if value is None else repr(value)])
    return buf.getvalue()
