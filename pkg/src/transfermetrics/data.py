"""Datasets, tensor files, manifests and stratified subsampling.

Tensor files use a small binary container (``PTRN``)::

    bytes 0-3   magic b"PTRN"
    bytes 4-7   version, u32 little-endian (= 1)
    byte  8     dtype code, u8 (0 = float32, 1 = int32)
    byte  9     rank, u8
    then        rank dims as u64 little-endian
    then        row-major little-endian payload

Headerless CSV of decimal numbers is accepted on load as a fallback.
"""

import json
import os
import struct
from dataclasses import InitVar, asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import FormatError, ValidationError

MAGIC = b"PTRN"
VERSION = 1
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<i4")}
NORMALIZATION_ATOL = 1e-6


# ---------------------------------------------------------------------------
# tensor I/O


def save_tensor(matrix, path):
    """Write ``matrix`` as a PTRN container.

    Floating arrays are stored as float32, integer arrays as int32.
    """
    arr = np.asarray(matrix)
    if arr.dtype.kind in "iub":
        code, out = 1, arr.astype("<i4")
    else:
        arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("cannot save non-finite entries")
        code, out = 0, arr.astype("<f4")
    if out.ndim > 255:
        raise ValidationError("rank too large")
    header = MAGIC + struct.pack("<IBB", VERSION, code, out.ndim)
    header += struct.pack(f"<{out.ndim}Q", *out.shape)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(out).tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"failed to write tensor to {path}: {exc}") from exc


def _parse_ptrn(buf):
    if len(buf) < 10:
        raise FormatError("truncated header", offset=len(buf))
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    code, rank = struct.unpack_from("<BB", buf, 8)
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}", offset=8)
    pos = 10
    if len(buf) < pos + 8 * rank:
        raise FormatError("truncated shape", offset=len(buf))
    shape = struct.unpack_from(f"<{rank}Q", buf, pos)
    pos += 8 * rank
    dtype = DTYPE_CODES[code]
    nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(buf) < pos + nbytes:
        raise FormatError(
            f"truncated payload: expected {nbytes} bytes, found {len(buf) - pos}",
            offset=len(buf),
        )
    if len(buf) > pos + nbytes:
        raise FormatError("trailing bytes after payload", offset=pos + nbytes)
    arr = np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize, offset=pos)
    arr = arr.reshape(shape).copy()
    if code == 0 and np.isnan(arr).any():
        raise ValidationError("NaN entries in tensor payload")
    return arr


def _parse_csv(buf):
    try:
        text = buf.decode("ascii")
    except UnicodeDecodeError:
        return None
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        return None
    try:
        data = [[float(tok) for tok in row.split(",")] for row in rows]
    except ValueError:
        return None
    if len({len(r) for r in data}) != 1:
        return None
    arr = np.asarray(data, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValidationError("NaN entries in CSV tensor")
    return arr


def load_tensor(path):
    """Read a PTRN container or a headerless CSV file.

    Raises
    ------
    FormatError
        Bad magic, unsupported version, or truncation; carries the byte offset.
    ValidationError
        NaN entries in the payload.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] == MAGIC:
        return _parse_ptrn(buf)
    arr = _parse_csv(buf)
    if arr is None:
        raise FormatError(f"unrecognized magic {buf[:4]!r} in {path}", offset=0)
    return arr


def load_labels(path):
    arr = np.asarray(load_tensor(path))
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValidationError(f"labels in {path} must be a vector, got shape {arr.shape}")
    if arr.size and not np.all(np.mod(arr, 1) == 0):
        raise ValidationError(f"labels in {path} must be integers")
    return arr.astype(np.int64)


# ---------------------------------------------------------------------------
# datasets


@dataclass
class FeatureSet:
    """Penultimate-layer features with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: Optional[int] = None
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.num_classes is None:
            self.num_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        if validate:
            validate_dataset(self)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureSet(self.features[idx], self.labels[idx], self.num_classes, validate=False)


@dataclass
class SourceDistribution:
    """Source-head outputs ``M(x_i)_z``; rows need not be normalized."""

    probs: np.ndarray
    normalized: bool = field(init=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise ValidationError("source probabilities must be an (N, |Z|) matrix")
        bad = _prob_violations(self.probs)
        if bad:
            raise ValidationError("; ".join(bad))
        self.normalized = bool(
            np.allclose(self.probs.sum(axis=1), 1.0, rtol=0, atol=NORMALIZATION_ATOL)
        )

    @property
    def num_sources(self):
        return self.probs.shape[1]

    def subset(self, indices):
        return SourceDistribution(self.probs[np.asarray(indices, dtype=np.int64)])


def _prob_violations(probs):
    out = []
    for i, j in zip(*np.nonzero(~np.isfinite(probs))):
        out.append(f"probs[{i}, {j}] is not finite")
    with np.errstate(invalid="ignore"):
        neg = np.nonzero(probs < 0)
    for i, j in zip(*neg):
        out.append(f"probs[{i}, {j}] is negative ({probs[i, j]!r})")
    return out


@dataclass
class DatasetReport:
    n: int
    d: int
    num_classes: int
    num_sources: Optional[int]
    class_counts: list
    absent_classes: list
    probs_normalized: Optional[bool]
    violations: list

    def to_dict(self):
        return asdict(self)


def validate_dataset(dataset, probs=None, raise_on_violation=True):
    """Check a dataset (and optional source outputs) for consistency.

    Every violation found is listed in the report; with
    ``raise_on_violation`` any violation raises a :class:`ValidationError`
    whose ``violations`` attribute holds them all. A row-count mismatch
    between features and probabilities always raises.
    """
    X = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels)
    k = dataset.num_classes
    violations = []
    if X.ndim != 2:
        violations.append(f"features must be 2-d, got shape {X.shape}")
        X = X.reshape(len(y), -1) if X.size else np.zeros((len(y), 0))
    n = X.shape[0]
    if n < 1:
        violations.append("dataset is empty")
    if y.shape != (n,):
        violations.append(f"labels shape {y.shape} does not match N={n}")
    for i, j in zip(*np.nonzero(~np.isfinite(X))):
        violations.append(f"features[{i}, {j}] is not finite")
    for i in np.nonzero((y < 0) | (y >= k))[0]:
        violations.append(f"labels[{i}] = {int(y[i])} outside [0, {k})")
    counts = np.bincount(y[(y >= 0) & (y < k)], minlength=k) if k else np.zeros(0, int)

    num_sources = None
    normalized = None
    if probs is not None:
        P = np.asarray(getattr(probs, "probs", probs), dtype=np.float64)
        num_sources = P.shape[1] if P.ndim == 2 else None
        if P.ndim != 2 or P.shape[0] != n:
            raise ValidationError(f"source probabilities shape {P.shape} does not match N={n}")
        else:
            violations.extend(_prob_violations(P))
            with np.errstate(invalid="ignore"):
                normalized = bool(
                    np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=NORMALIZATION_ATOL)
                )
    report = DatasetReport(
        n=n,
        d=X.shape[1],
        num_classes=int(k),
        num_sources=num_sources,
        class_counts=[int(c) for c in counts],
        absent_classes=[int(c) for c in np.nonzero(counts == 0)[0]],
        probs_normalized=normalized,
        violations=violations,
    )
    if violations and raise_on_violation:
        err = ValidationError("; ".join(violations[:10]) + (" ..." if len(violations) > 10 else ""))
        err.violations = violations
        raise err
    return report


# ---------------------------------------------------------------------------
# manifests


@dataclass
class CheckpointEntry:
    id: str
    features_path: str
    labels_path: str
    source_probs_path: Optional[str] = None
    test_error: Optional[float] = None


@dataclass
class CheckpointManifest:
    entries: list
    task: str = "task"
    num_classes: Optional[int] = None
    root: Optional[str] = None

    def __post_init__(self):
        self.entries = [
            e if isinstance(e, CheckpointEntry) else CheckpointEntry(**e)
            for e in self.entries
        ]
        ids = [e.id for e in self.entries]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise ValidationError(f"duplicate checkpoint ids: {dup}")
        for e in self.entries:
            if e.test_error is not None and not 0.0 <= e.test_error <= 1.0:
                raise ValidationError(f"test_error of {e.id} outside [0, 1]")

    @property
    def ids(self):
        return [e.id for e in self.entries]

    def resolve(self, path):
        if path is None:
            return None
        p = Path(path)
        if not p.is_absolute() and self.root is not None:
            p = Path(self.root) / p
        return p

    def check_files(self):
        missing = []
        for e in self.entries:
            for p in (e.features_path, e.labels_path, e.source_probs_path):
                if p is not None and not self.resolve(p).exists():
                    missing.append(f"{e.id}: {p}")
        if missing:
            raise ValidationError("missing files: " + ", ".join(missing))

    def test_errors(self):
        return {e.id: e.test_error for e in self.entries}

    def to_dict(self):
        return {
            "task": self.task,
            "num_classes": self.num_classes,
            "checkpoints": [asdict(e) for e in self.entries],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path, check_files=True):
        with open(path) as fh:
            doc = json.load(fh)
        entries = doc.get("checkpoints", doc.get("entries"))
        if entries is None:
            raise ValidationError(f"manifest {path} has no 'checkpoints' list")
        manifest = cls(
            entries=entries,
            task=doc.get("task", Path(path).stem),
            num_classes=doc.get("num_classes"),
            root=os.path.dirname(os.path.abspath(path)),
        )
        if check_files:
            manifest.check_files()
        return manifest


# ---------------------------------------------------------------------------
# subsampling


@dataclass(frozen=True)
class SubsampleSpec:
    samples_per_class: int
    min_total: int = 20
    num_splits: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_class < 1:
            raise ValidationError("samples_per_class must be >= 1")
        if self.num_splits < 1:
            raise ValidationError("num_splits must be >= 1")
        if self.min_total < 0:
            raise ValidationError("min_total must be >= 0")


def subsample_indices(labels, num_classes, spec, split_index):
    """Indices of one stratified split, sorted ascending.

    Each class contributes ``samples_per_class`` examples without
    replacement (or all of its examples if it has fewer); the draw is then
    topped up uniformly from the remaining examples to reach
    ``spec.min_total``.
    """
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValidationError("cannot subsample an empty dataset")
    if not 0 <= split_index < spec.num_splits:
        raise ValidationError(f"split_index {split_index} outside [0, {spec.num_splits})")
    rng = np.random.default_rng([spec.seed, split_index])
    chosen = []
    for c in range(num_classes):
        members = np.nonzero(y == c)[0]
        take = min(spec.samples_per_class, members.size)
        chosen.append(rng.permutation(members)[:take])
    chosen = np.concatenate(chosen) if chosen else np.zeros(0, np.int64)
    short = spec.min_total - chosen.size
    if short > 0:
        rest = np.setdiff1d(np.arange(y.size), chosen)
        extra = rng.choice(rest, size=min(short, rest.size), replace=False)
        chosen = np.concatenate([chosen, extra])
    return np.sort(chosen)


def stratified_subsample(dataset, spec, split_index):
    """Return ``(subset, indices)`` for one split of ``dataset``."""
    idx = subsample_indices(dataset.labels, dataset.num_classes, spec, split_index)
    return dataset.subset(idx), idx
