"""Datasets, pool bookkeeping, splits, and the ALFX feature-file format.

A dataset here is a frozen table of precomputed feature vectors plus integer
class labels.  Nothing in the package ever mutates a dataset; the simulation
state that changes over time (which instances are labeled) lives in
``PoolState``.

The on-disk interchange format, ALFX, is a little-endian binary layout:

    magic   4 bytes  b"ALFX"
    version u32      currently 1
    N       u64      number of instances
    D       u32      feature dimension
    K       u32      number of classes
    nlen    u16      dataset-name byte length
    name    nlen bytes, UTF-8
    labels  N * i32
    features N * D * f32, row-major

There is no padding anywhere and no trailing data is tolerated.
"""

from dataclasses import dataclass
import struct

import numpy as np

from .errors import FormatError, ValidationError

ALFX_MAGIC = b"ALFX"
ALFX_VERSION = 1

_HEADER = struct.Struct("<IQIIH")  # version, N, D, K, name length


@dataclass(frozen=True)
class Dataset:
    """Immutable pool of feature vectors with ground-truth labels.

    Attributes:
        features: (N, D) float32 array, finite everywhere.
        labels: (N,) int32 array with values in [0, num_classes).
        num_classes: total number of classes; every class must appear
            at least once among the labels.
        name: short human-readable identifier carried through files.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "unnamed"

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        labs = np.ascontiguousarray(self.labels, dtype=np.int32)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)
        _validate_dataset(self)
        feats.setflags(write=False)
        labs.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


def _validate_dataset(ds: Dataset) -> None:
    if ds.features.ndim != 2:
        raise ValidationError(
            f"features must be a 2-d array, got shape {ds.features.shape}"
        )
    n, d = ds.features.shape
    if ds.labels.ndim != 1 or ds.labels.shape[0] != n:
        raise ValidationError(
            f"labels must be a length-{n} vector, got shape {ds.labels.shape}"
        )
    if d < 1:
        raise ValidationError("feature dimension must be at least 1")
    k = int(ds.num_classes)
    if k < 1:
        raise ValidationError("num_classes must be at least 1")
    if n < k:
        raise ValidationError(
            f"need at least one instance per class: N={n} < K={k}"
        )
    bad = np.flatnonzero((ds.labels < 0) | (ds.labels >= k))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(
            f"label {int(ds.labels[i])} at row {i} is outside [0, {k})"
        )
    nonfinite = ~np.isfinite(ds.features)
    if nonfinite.any():
        r, c = np.argwhere(nonfinite)[0]
        raise ValidationError(f"non-finite feature value at row {r}, column {c}")
    present = np.unique(ds.labels)
    if present.size != k:
        missing = sorted(set(range(k)) - set(int(v) for v in present))
        raise ValidationError(f"class {missing[0]} has no instances")


def write_feature_file(dataset: Dataset, path) -> None:
    """Serialize a dataset to an ALFX file.

    The output is a pure function of the dataset contents, so writing the
    same dataset twice produces byte-identical files.
    """
    name_bytes = dataset.name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise ValidationError("dataset name exceeds 65535 UTF-8 bytes")
    with open(path, "wb") as fh:
        fh.write(ALFX_MAGIC)
        fh.write(
            _HEADER.pack(
                ALFX_VERSION,
                dataset.n,
                dataset.dim,
                dataset.num_classes,
                len(name_bytes),
            )
        )
        fh.write(name_bytes)
        fh.write(dataset.labels.astype("<i4").tobytes())
        fh.write(dataset.features.astype("<f4").tobytes())


def load_feature_file(path) -> Dataset:
    """Parse an ALFX file, rejecting any structural deviation.

    Raises:
        FormatError: wrong magic, unknown version, truncated blocks,
            trailing bytes, or an undecodable name.
        ValidationError: structurally sound file whose contents violate
            dataset invariants (label range, non-finite features, ...).
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != ALFX_MAGIC:
        raise FormatError(f"bad magic: expected {ALFX_MAGIC!r}")
    off = 4
    if len(blob) < off + _HEADER.size:
        raise FormatError("truncated header")
    version, n, d, k, nlen = _HEADER.unpack_from(blob, off)
    off += _HEADER.size
    if version != ALFX_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if len(blob) < off + nlen:
        raise FormatError("truncated name field")
    try:
        name = blob[off : off + nlen].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"dataset name is not valid UTF-8: {exc}") from None
    off += nlen
    labels_bytes = n * 4
    if len(blob) < off + labels_bytes:
        raise FormatError("truncated labels block")
    labels = np.frombuffer(blob, dtype="<i4", count=n, offset=off)
    off += labels_bytes
    feat_bytes = n * d * 4
    if len(blob) < off + feat_bytes:
        raise FormatError("truncated features block")
    feats = np.frombuffer(blob, dtype="<f4", count=n * d, offset=off)
    off += feat_bytes
    if len(blob) != off:
        raise FormatError(f"{len(blob) - off} trailing bytes after features block")
    return Dataset(feats.reshape(n, d), labels, int(k), name)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for a Gaussian-blob synthetic dataset.

    ``class_separation`` fixes the mean pairwise distance between class
    centroids after rescaling, so separation 0 collapses every centroid to
    the origin and makes the classes indistinguishable.
    """

    num_classes: int
    dim: int
    per_class: int
    cluster_spread: float
    class_separation: float
    seed: int
    name: str = "synthetic"

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValidationError("num_classes must be at least 1")
        if self.dim < 1:
            raise ValidationError("dim must be at least 1")
        if self.per_class < 2:
            raise ValidationError("per_class must be at least 2")
        if not (self.cluster_spread > 0):
            raise ValidationError("cluster_spread must be positive")
        if self.class_separation < 0:
            raise ValidationError("class_separation must be non-negative")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Sample a blob dataset: K centroids, per_class points per centroid.

    Centroids are drawn standard normal and rescaled so their mean pairwise
    Euclidean distance equals ``class_separation`` exactly.  Instances are
    centroid plus isotropic Gaussian noise with standard deviation
    ``cluster_spread``.  Rows are class-major: all class-0 instances first.
    """
    rng = np.random.default_rng(spec.seed)
    k, d = spec.num_classes, spec.dim
    centroids = rng.normal(size=(k, d))
    if k > 1:
        diffs = centroids[:, None, :] - centroids[None, :, :]
        dists = np.sqrt((diffs**2).sum(axis=2))
        mean_pair = dists[np.triu_indices(k, 1)].mean()
        if mean_pair > 0:
            centroids *= spec.class_separation / mean_pair
        # mean_pair == 0 only if all draws coincide; leave at origin then
    else:
        centroids[:] = 0.0
    labels = np.repeat(np.arange(k, dtype=np.int32), spec.per_class)
    noise = rng.normal(scale=spec.cluster_spread, size=(k * spec.per_class, d))
    feats = (centroids[labels] + noise).astype(np.float32)
    return Dataset(feats, labels, k, spec.name)


@dataclass(frozen=True)
class PoolState:
    """Partition of a dataset into labeled, unlabeled, and evaluation sets.

    All three index arrays are sorted, duplicate-free, and mutually
    disjoint.  The evaluation set never overlaps the train pool and stays
    fixed for the lifetime of a simulation; acquisition only moves indices
    from ``unlabeled`` to ``labeled``.
    """

    labeled: np.ndarray
    unlabeled: np.ndarray
    eval_set: np.ndarray

    def __post_init__(self):
        for field in ("labeled", "unlabeled", "eval_set"):
            arr = np.asarray(getattr(self, field))
            if arr.size and not np.issubdtype(arr.dtype, np.integer):
                raise ValidationError(f"{field} indices must be integers")
            arr = np.sort(arr.astype(np.int64, copy=True).ravel())
            if arr.size and (np.diff(arr) == 0).any():
                raise ValidationError(f"duplicate index in {field}")
            if arr.size and arr[0] < 0:
                raise ValidationError(f"negative index in {field}")
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)
        if np.intersect1d(self.labeled, self.unlabeled).size:
            raise ValidationError("labeled and unlabeled sets overlap")
        train = np.concatenate([self.labeled, self.unlabeled])
        if np.intersect1d(train, self.eval_set).size:
            raise ValidationError("eval set overlaps the train pool")

    @property
    def train_size(self) -> int:
        return int(self.labeled.size + self.unlabeled.size)

    def acquire(self, indices) -> "PoolState":
        """Move the given unlabeled indices into the labeled set.

        Returns a new PoolState; the receiver is unchanged.
        """
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ValidationError("cannot acquire an empty batch")
        if np.unique(idx).size != idx.size:
            raise ValidationError("acquisition batch contains duplicates")
        if not np.isin(idx, self.unlabeled).all():
            outside = idx[~np.isin(idx, self.unlabeled)]
            raise ValidationError(
                f"index {int(outside[0])} is not in the unlabeled pool"
            )
        keep = self.unlabeled[~np.isin(self.unlabeled, idx)]
        return PoolState(
            np.concatenate([self.labeled, idx]), keep, self.eval_set
        )


def make_splits(dataset: Dataset, eval_fraction: float, seed: int) -> PoolState:
    """Stratified eval/train split; the labeled set starts empty.

    Per class c with n_c instances, the eval set receives
    ``min(n_c - 1, max(1, round(eval_fraction * n_c)))`` instances chosen
    uniformly, so every class appears in both the eval set and the train
    pool.  Classes with fewer than 2 instances cannot satisfy that and are
    rejected.
    """
    if not (0.0 < eval_fraction < 1.0):
        raise ValidationError("eval_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    eval_parts = []
    train_parts = []
    for c in range(dataset.num_classes):
        cls_idx = np.flatnonzero(dataset.labels == c)
        n_c = cls_idx.size
        if n_c < 2:
            raise ValidationError(
                f"class {c} has {n_c} instance(s); need at least 2 to split"
            )
        n_eval = int(round(eval_fraction * n_c))
        n_eval = min(n_c - 1, max(1, n_eval))
        order = rng.permutation(n_c)
        eval_parts.append(cls_idx[order[:n_eval]])
        train_parts.append(cls_idx[order[n_eval:]])
    return PoolState(
        labeled=np.empty(0, dtype=np.int64),
        unlabeled=np.concatenate(train_parts),
        eval_set=np.concatenate(eval_parts),
    )
