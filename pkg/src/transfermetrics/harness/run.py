"""Run every enabled metric over a checkpoint manifest."""

import datetime
import json
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..data import FeatureSet, SourceDistribution, load_labels, load_tensor, subsample_indices
from ..exceptions import ValidationError
from ..metrics.base import _jsonable
from ..metrics.leep import gmm_source_distribution, leep_score, nce_score
from ..metrics.pactran import pactran_dirichlet, pactran_gamma, pactran_gaussian
from ..metrics.regression import h_score, linear_valid_metric, logme_score
from ..numerics.linear import fit_l2_softmax
from ..numerics.optimize import OptimizerConfig
from .config import SOURCE_METRICS
from .evaluate import evaluate_ranking, select_hparams_via_linear_valid, std_ratio

UNAVAILABLE = "unavailable"
FAILED = "failed"

# Sign applied to each raw metric value so that higher means more transferable.
ORIENTATION = {
    "leep": 1.0,
    "nce": 1.0,
    "nleep": 1.0,
    "hscore": 1.0,
    "logme": 1.0,
    "linear": -1.0,
    "pt_dir": -1.0,
    "pt_gam": -1.0,
    "npt_dir": -1.0,
    "npt_gam": -1.0,
    "pt_gauss_fix": -1.0,
    "pt_gauss_grid": -1.0,
}


def pair_key(beta_factor, sigma0_factor):
    """Report key for a PT-Gauss pair: beta = a * N, sigma0^2 = b / D_eff."""
    return f"beta={beta_factor:g}N,sigma0_sq={sigma0_factor:g}/D_eff"


def beta_key(beta_factor):
    return f"beta={beta_factor:g}N"


def derived_seed(seed, checkpoint_id, split):
    """Integer seed from (master seed, checkpoint id, split); order independent."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(checkpoint_id.encode()), int(split)])
    return int(ss.generate_state(1)[0])


class _Unit:
    """Scores of one checkpoint on one split."""

    def __init__(self):
        self.raw = {}
        self.status = {}
        self.errors = {}
        self.linear_grid = {}
        self.gauss_grid = {}
        self.lv_error = None

    def fail(self, metric, exc):
        self.status[metric] = FAILED
        self.errors[metric] = f"{type(exc).__name__}: {exc}"


def _load_checkpoint(manifest, entry, num_classes):
    features = load_tensor(manifest.resolve(entry.features_path))
    labels = load_labels(manifest.resolve(entry.labels_path))
    fs = FeatureSet(features, labels, num_classes)
    probs = None
    if entry.source_probs_path:
        probs = SourceDistribution(load_tensor(manifest.resolve(entry.source_probs_path))).probs
        if probs.shape[0] != fs.n:
            raise ValidationError(
                f"{entry.id}: source probabilities have {probs.shape[0]} rows, features {fs.n}"
            )
    return fs, probs


def _score_unit(fs, probs, idx, split, ckpt_id, config, opt):
    unit = _Unit()
    enabled = set(config.metrics)
    sub = fs.subset(idx)
    y, k = sub.labels, sub.num_classes
    n, d_eff = sub.n, sub.d + 1
    sub_probs = probs[idx] if probs is not None else None

    def attempt(name, fn):
        if name not in enabled:
            return
        if name in SOURCE_METRICS and sub_probs is None:
            unit.status[name] = UNAVAILABLE
            return
        try:
            unit.raw[name] = float(fn())
            unit.status[name] = "ok"
        except (ValidationError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            unit.fail(name, exc)

    attempt("leep", lambda: leep_score(sub_probs, y, k).score)
    attempt("nce", lambda: nce_score(sub_probs, y, k).score)
    attempt("pt_dir", lambda: pactran_dirichlet(sub_probs, y, k)[0])
    attempt("pt_gam", lambda: pactran_gamma(sub_probs, y, k)[0])
    attempt("hscore", lambda: h_score(sub).score)
    attempt("logme", lambda: logme_score(sub).score)

    if enabled & {"nleep", "npt_dir", "npt_gam"}:
        gmm_seed = derived_seed(config.seed, ckpt_id, split)
        try:
            post, _ = gmm_source_distribution(sub, config.nleep_energy, None, gmm_seed)
        except (ValidationError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            for name in ("nleep", "npt_dir", "npt_gam"):
                if name in enabled:
                    unit.fail(name, exc)
        else:
            attempt("nleep", lambda: leep_score(post, y, k).score)
            attempt("npt_dir", lambda: pactran_dirichlet(post, y, k)[0])
            attempt("npt_gam", lambda: pactran_gamma(post, y, k)[0])

    needs_lv = enabled & {"linear_valid", "linear", "pt_gauss_grid"}
    if needs_lv:
        try:
            lv = linear_valid_metric(
                sub,
                beta_grid=[f * n for f in config.beta_factors],
                seed=[config.seed, split],
                config=opt,
            )
            unit.lv_error = float(lv.score)
            if "linear_valid" in enabled:
                unit.raw["linear_valid"] = unit.lv_error
                unit.status["linear_valid"] = "ok"
        except (ValidationError, ArithmeticError, ValueError) as exc:
            if "linear_valid" in enabled:
                unit.fail("linear_valid", exc)

    fits = {}
    beta_factors = []
    if enabled & {"linear", "pt_gauss_grid"}:
        beta_factors.extend(config.beta_factors)
    if "pt_gauss_fix" in enabled and config.fix_beta_factor not in beta_factors:
        beta_factors.append(config.fix_beta_factor)
    fit_errors = {}
    for a in beta_factors:
        try:
            fits[a] = fit_l2_softmax(sub.features, y, a * n, k, config=opt)
        except (ValidationError, ArithmeticError, ValueError) as exc:
            fit_errors[a] = exc

    if enabled & {"linear", "pt_gauss_grid"}:
        for a in config.beta_factors:
            if a in fits:
                unit.linear_grid[beta_key(a)] = float(fits[a].loss)
            for b in config.sigma0_factors:
                if a not in fits:
                    continue
                try:
                    _, res = pactran_gaussian(sub.features, y, k, a * n, b / d_eff, fit=fits[a])
                    unit.gauss_grid[pair_key(a, b)] = (res.metric, res.rer, res.fr)
                except (ValidationError, ArithmeticError, ValueError) as exc:
                    fit_errors[(a, b)] = exc
    if "pt_gauss_fix" in enabled:
        a, b = config.fix_beta_factor, config.fix_sigma0_factor
        if a in fits:
            attempt(
                "pt_gauss_fix",
                lambda: pactran_gaussian(sub.features, y, k, a * n, b / d_eff, fit=fits[a])[0],
            )
        else:
            unit.fail("pt_gauss_fix", fit_errors[a])
    for name in ("linear", "pt_gauss_grid"):
        if name in enabled and fit_errors:
            unit.fail(name, next(iter(fit_errors.values())))
    return unit


def _work(manifest, entry, data, split, idx, config, opt):
    fs, probs, load_error = data
    if load_error is not None:
        unit = _Unit()
        for name in config.metrics:
            unit.fail(name, load_error)
        return unit
    return _score_unit(fs, probs, idx, split, entry.id, config, opt)


def _prepare(manifest, num_classes, ref_labels):
    prepared = {}
    for entry in manifest.entries:
        try:
            fs, probs = _load_checkpoint(manifest, entry, num_classes)
            if not np.array_equal(fs.labels, ref_labels):
                raise ValidationError(f"{entry.id}: labels differ from the task's shared labels")
            prepared[entry.id] = (fs, probs, None)
        except (ValidationError, OSError, ValueError) as exc:
            prepared[entry.id] = (None, None, exc)
    return prepared


def _select(column_by_key, lv_errors, ok_ids, reverse_sign):
    vectors = {
        key: [reverse_sign * column_by_key[key][c] for c in ok_ids] for key in column_by_key
    }
    return select_hparams_via_linear_valid(vectors, [lv_errors[c] for c in ok_ids])


def run_metrics(manifest, spec, config, timestamp=True):
    """Compute oriented metric scores for every checkpoint and split.

    All checkpoints of a split are scored on the same subsample indices,
    drawn from the task's shared labels. Scores are oriented so that higher
    means more transferable. LINEAR and PT-Gauss_grid hyperparameters are
    chosen per split by Kendall tau against that split's LINEAR-VALID errors.

    Parameters
    ----------
    manifest : CheckpointManifest
    spec : SubsampleSpec
    config : MetricConfig
    timestamp : bool
        Include a ``generated_at`` field.

    Returns
    -------
    dict
        JSON-ready report; cells that could not be computed are ``None`` and
        listed under ``flags``.
    """
    if not manifest.entries:
        raise ValidationError("manifest has no checkpoints")
    first = manifest.entries[0]
    ref_labels = load_labels(manifest.resolve(first.labels_path))
    num_classes = manifest.num_classes or int(ref_labels.max()) + 1
    opt = OptimizerConfig(max_iterations=config.max_iterations)
    prepared = _prepare(manifest, num_classes, ref_labels)
    ids = list(manifest.ids)

    split_indices = [
        subsample_indices(ref_labels, num_classes, spec, s) for s in range(spec.num_splits)
    ]
    jobs = [(entry, s) for s in range(spec.num_splits) for entry in manifest.entries]
    with ThreadPoolExecutor(max_workers=config.resolved_workers()) as pool:
        units = list(
            pool.map(
                lambda job: _work(
                    manifest, job[0], prepared[job[0].id], job[1], split_indices[job[1]], config, opt
                ),
                jobs,
            )
        )
    results = {(entry.id, s): u for (entry, s), u in zip(jobs, units)}

    report = {"task": manifest.task}
    if timestamp:
        report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    report["config"] = config.to_dict()
    report["subsample"] = {
        "samples_per_class": spec.samples_per_class,
        "min_total": spec.min_total,
        "num_splits": spec.num_splits,
        "seed": spec.seed,
    }
    report["num_classes"] = num_classes
    report["checkpoints"] = ids
    report["splits"] = []
    failures = []
    linear_choices = []
    for s in range(spec.num_splits):
        idx = split_indices[s]
        n = int(idx.size)
        split_units = {c: results[(c, s)] for c in ids}
        d = next((p[0].d for p in prepared.values() if p[0] is not None), None)
        block = {
            "split": s,
            "n": n,
            "d_eff": d + 1 if d is not None else None,
            "grids": {
                "beta": [f * n for f in config.beta_factors],
                "sigma0_sq": [f / (d + 1) for f in config.sigma0_factors] if d is not None else None,
            },
        }
        scores, flags = {}, {}
        for name in config.metrics:
            scores[name] = {}
            for c in ids:
                u = split_units[c]
                if name in ("linear", "pt_gauss_grid"):
                    scores[name][c] = None
                    continue
                status = u.status.get(name, FAILED)
                if status == "ok":
                    raw = u.raw[name]
                    scores[name][c] = 1.0 - raw if name == "linear_valid" else ORIENTATION[name] * raw
                else:
                    scores[name][c] = None
                    flags.setdefault(name, {})[c] = status
                    if status == FAILED:
                        failures.append(
                            {"checkpoint": c, "split": s, "metric": name, "error": u.errors.get(name)}
                        )

        chosen = {}
        lv = {c: split_units[c].lv_error for c in ids}
        grid_scores = {}
        if "linear" in config.metrics or "pt_gauss_grid" in config.metrics:
            keys_lin = [beta_key(a) for a in config.beta_factors]
            keys_pair = [pair_key(a, b) for a, b in config.grid]
            ok = [
                c
                for c in ids
                if lv[c] is not None
                and all(k in split_units[c].linear_grid for k in keys_lin)
                and all(k in split_units[c].gauss_grid for k in keys_pair)
            ]
            lin_cols = {k: {c: split_units[c].linear_grid[k] for c in ok} for k in keys_lin}
            pair_cols = {k: {c: split_units[c].gauss_grid[k][0] for c in ok} for k in keys_pair}
            grid_scores = {
                "linear": {k: {c: -v for c, v in col.items()} for k, col in lin_cols.items()},
                "pt_gauss_grid": {k: {c: -v for c, v in col.items()} for k, col in pair_cols.items()},
            }
            block["std_ratio"] = {
                k: std_ratio(
                    [split_units[c].gauss_grid[k][2] for c in ok],
                    [split_units[c].gauss_grid[k][1] for c in ok],
                )
                if len(ok) >= 2
                else None
                for k in keys_pair
            }
            for name, cols in (("linear", lin_cols), ("pt_gauss_grid", pair_cols)):
                if name not in config.metrics:
                    continue
                for c in ids:
                    if c not in ok:
                        flags.setdefault(name, {})[c] = FAILED
                        failures.append(
                            {
                                "checkpoint": c,
                                "split": s,
                                "metric": name,
                                "error": split_units[c].errors.get(name, "missing grid values"),
                            }
                        )
                if len(ok) < 2:
                    chosen[name] = {"key": None, "taus": {}, "degenerate": True}
                    continue
                sel = _select(cols, lv, ok, 1.0)
                chosen[name] = {"key": sel.key, "taus": sel.taus, "degenerate": sel.degenerate}
                for c in ok:
                    scores[name][c] = -cols[sel.key][c]
                if name == "linear":
                    linear_choices.append(sel.taus)
        block["scores"] = scores
        block["flags"] = flags
        block["chosen"] = chosen
        block["grid_scores"] = grid_scores
        report["splits"].append(block)

    if "linear" in config.metrics and linear_choices:
        keys = [beta_key(a) for a in config.beta_factors]
        mean_tau = {
            k: float(np.mean([t[k] for t in linear_choices if t.get(k) is not None] or [np.nan]))
            for k in keys
        }
        finite = {k: v for k, v in mean_tau.items() if np.isfinite(v)}
        shared = max(finite, key=lambda k: (finite[k], -keys.index(k))) if finite else None
        report["linear_shared_choice"] = {"key": shared, "mean_taus": mean_tau}
    report["failures"] = failures
    if all(e.test_error is not None for e in manifest.entries):
        report["evaluation"] = evaluate_ranking(report, manifest)
    return _jsonable(report)


def dump_report(report, path):
    """Write a report as JSON, preserving field order."""
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def load_report(path):
    with open(path) as fh:
        return json.load(fh)
