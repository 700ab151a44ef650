"""Synthetic checkpoint families with a known quality ordering."""

from pathlib import Path

import numpy as np

from ..data import CheckpointEntry, CheckpointManifest, save_tensor
from ..numerics.linear import fit_l2_softmax, logits
from ..numerics.special import softmax


def _class_means(spec, rng):
    means = rng.standard_normal((spec.num_classes, spec.dim))
    return means / np.linalg.norm(means, axis=1, keepdims=True)


def _balanced_labels(n, k, rng):
    return rng.permutation(np.arange(n) % k)


def checkpoint_features(means, labels, noise, rng):
    """Class means shrunk by ``1 - noise`` plus isotropic noise of scale ``noise``."""
    return means[labels] * (1.0 - noise) + noise * rng.standard_normal((labels.size, means.shape[1]))


def source_outputs(features, noise, num_sources):
    z = min(features.shape[1], num_sources)
    return softmax((1.0 - noise) * features[:, :z], axis=1)


def generate_synthetic_benchmark(spec, out_dir):
    """Write a synthetic checkpoint family and its manifest to ``out_dir``.

    Ground-truth test error of each checkpoint is the 0-1 error of an L2
    softmax probe (``beta = probe_beta_factor * n_train``) trained on the
    ``n_train`` examples and evaluated on ``n_test`` fresh ones.

    Returns
    -------
    manifest : CheckpointManifest
    errors : dict
        Checkpoint id to ground-truth test error.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = np.random.SeedSequence(spec.seed)
    rng = np.random.default_rng(base)
    means = _class_means(spec, rng)
    y_train = _balanced_labels(spec.n_train, spec.num_classes, rng)
    y_test = _balanced_labels(spec.n_test, spec.num_classes, rng)
    save_tensor(y_train.astype(np.int32), out / "labels.ptrn")

    entries = []
    errors = {}
    width = len(str(spec.num_checkpoints - 1))
    for c, noise in enumerate(spec.noise_levels):
        ckpt_rng = np.random.default_rng([spec.seed, c])
        cid = f"ckpt_{c:0{width}d}"
        train = checkpoint_features(means, y_train, noise, ckpt_rng)
        test = checkpoint_features(means, y_test, noise, ckpt_rng)
        probe = fit_l2_softmax(train, y_train, spec.probe_beta_factor * spec.n_train, spec.num_classes)
        pred = np.argmax(logits(test, probe.theta), axis=1)
        err = float(np.mean(pred != y_test))
        save_tensor(train, out / f"{cid}_features.ptrn")
        save_tensor(source_outputs(train, noise, spec.num_sources), out / f"{cid}_probs.ptrn")
        entries.append(
            CheckpointEntry(
                id=cid,
                features_path=f"{cid}_features.ptrn",
                labels_path="labels.ptrn",
                source_probs_path=f"{cid}_probs.ptrn",
                test_error=err,
            )
        )
        errors[cid] = err
    manifest = CheckpointManifest(
        entries, task="synthetic", num_classes=spec.num_classes, root=str(out.resolve())
    )
    manifest.save(out / "manifest.json")
    return manifest, errors
