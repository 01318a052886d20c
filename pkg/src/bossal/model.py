"""Linear softmax head: training, inference, evaluation, gradient checks.

The classifier is a single linear layer over precomputed features, trained
with minibatch SGD on the softmax cross-entropy objective.  Weight decay is
applied by adding ``weight_decay * W`` to the weight gradient (weights only,
never biases), matching the common deep-learning convention.  All arithmetic
runs in float64 regardless of the float32 feature storage, which keeps
training deterministic for a fixed pair of seeds.
"""

from dataclasses import dataclass
import math

import numpy as np

from .data import Dataset
from .errors import ValidationError

LOSSES = ("zero_one", "cross_entropy", "brier")

# floor used when taking logs of predicted probabilities
PROB_CLAMP = 1e-12


def validate_loss(loss: str) -> str:
    if loss not in LOSSES:
        raise ValidationError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    return loss


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run of the linear head."""

    epochs: int = 200
    base_lr: float = 0.01
    weight_decay: float = 1e-4
    minibatch_size: int = 64
    init_seed: int = 0
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if not (self.base_lr > 0):
            raise ValidationError("base_lr must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be non-negative")
        if self.minibatch_size < 1:
            raise ValidationError("minibatch_size must be at least 1")


@dataclass(frozen=True)
class LinearHead:
    """Trained parameters: weights (K, D) and biases (K,), both float64."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.biases, dtype=np.float64)
        if w.ndim != 2:
            raise ValidationError(f"weights must be 2-d, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValidationError(
                f"biases shape {b.shape} does not match weights {w.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("head parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])


@dataclass
class RetrainCounter:
    """Tallies retraining work: number of runs and instances processed.

    ``instances`` accumulates the training-set size of every counted run,
    so it equals the sum of |train set| over all retrainings.
    """

    retrains: int = 0
    instances: int = 0

    def add(self, n: int) -> None:
        self.retrains += 1
        self.instances += int(n)


def cosine_lr(epoch: int, config: TrainConfig) -> float:
    """Learning rate for the given epoch under cosine annealing.

    lr(e) = base_lr * 0.5 * (1 + cos(pi * e / epochs)), so epoch 0 trains at
    the full base rate and the schedule decays toward (but never reaches)
    zero at the final epoch.
    """
    if not (0 <= epoch < config.epochs):
        raise ValidationError(
            f"epoch {epoch} outside [0, {config.epochs})"
        )
    return config.base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_indices(dataset: Dataset, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValidationError("index set is empty")
    if idx.min() < 0 or idx.max() >= dataset.n:
        raise ValidationError("index outside dataset range")
    if np.unique(idx).size != idx.size:
        raise ValidationError("index set contains duplicates")
    return idx


def train_head(
    dataset: Dataset,
    indices,
    config: TrainConfig,
    labels: np.ndarray | None = None,
    counter: RetrainCounter | None = None,
    loss_trace: list | None = None,
) -> LinearHead:
    """Train a fresh linear head on the given instances.

    Parameters are re-initialized on every call (weights Gaussian with
    standard deviation 0.01 from ``init_seed``, biases zero), then updated
    by minibatch SGD for ``config.epochs`` epochs.  Each epoch shuffles the
    instance order with the ``shuffle_seed`` stream and walks it in
    minibatches of ``minibatch_size``; a final incomplete minibatch is
    trained on, not dropped.

    Args:
        dataset: feature/label source.
        indices: distinct dataset rows to train on.
        config: hyperparameters and seeds.
        labels: optional full-length label table overriding the dataset's
            ground truth (used for pseudo-label assessment).
        counter: if given, records one retraining of len(indices) instances.
        loss_trace: if given, the full-training-set objective (mean
            cross-entropy plus 0.5 * weight_decay * ||W||^2) is appended
            after every epoch.

    Returns:
        The trained LinearHead.
    """
    idx = _check_indices(dataset, indices)
    if counter is not None:
        counter.add(idx.size)
    k, d = dataset.num_classes, dataset.dim
    x = dataset.features[idx].astype(np.float64)
    label_table = dataset.labels if labels is None else np.asarray(labels)
    y = label_table[idx].astype(np.int64)
    if y.min() < 0 or y.max() >= k:
        raise ValidationError("training label outside [0, num_classes)")

    init_rng = np.random.default_rng(config.init_seed)
    w = init_rng.normal(0.0, 0.01, size=(k, d))
    b = np.zeros(k)
    onehot = np.eye(k)[y]

    shuffle_rng = np.random.default_rng(config.shuffle_seed)
    n = idx.size
    mb = config.minibatch_size
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config)
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, mb):
            take = perm[start : start + mb]
            xb = x[take]
            probs = _softmax(xb @ w.T + b)
            gl = (probs - onehot[take]) / take.size
            gw = gl.T @ xb + config.weight_decay * w
            gb = gl.sum(axis=0)
            w -= lr * gw
            b -= lr * gb
        if loss_trace is not None:
            probs = _softmax(x @ w.T + b)
            ce = -np.log(np.maximum(probs[np.arange(n), y], PROB_CLAMP)).mean()
            loss_trace.append(float(ce + 0.5 * config.weight_decay * (w**2).sum()))
    return LinearHead(w, b)


def predict_proba(head: LinearHead, dataset: Dataset, indices) -> np.ndarray:
    """Softmax class probabilities, shape (len(indices), K)."""
    idx = _check_indices(dataset, indices)
    if head.dim != dataset.dim:
        raise ValidationError(
            f"head dimension {head.dim} does not match dataset {dataset.dim}"
        )
    logits = dataset.features[idx].astype(np.float64) @ head.weights.T + head.biases
    return _softmax(logits)


def evaluate(
    head: LinearHead,
    dataset: Dataset,
    indices,
    loss: str,
    labels: np.ndarray | None = None,
) -> float:
    """Mean loss of the head over the given instances.

    zero_one is the error rate with argmax predictions (ties go to the
    lowest class id), cross_entropy clamps probabilities at 1e-12 before
    the log, and brier is the squared distance to the one-hot target summed
    over classes.  ``labels`` optionally overrides the ground-truth table.
    """
    validate_loss(loss)
    idx = _check_indices(dataset, indices)
    label_table = dataset.labels if labels is None else np.asarray(labels)
    y = label_table[idx].astype(np.int64)
    probs = predict_proba(head, dataset, idx)
    if loss == "zero_one":
        return float((probs.argmax(axis=1) != y).mean())
    if loss == "cross_entropy":
        picked = probs[np.arange(idx.size), y]
        return float(-np.log(np.maximum(picked, PROB_CLAMP)).mean())
    onehot = np.eye(head.num_classes)[y]
    return float(((probs - onehot) ** 2).sum(axis=1).mean())


def _ce_value_and_grad(w, b, x, y):
    probs = _softmax(x @ w.T + b)
    n = x.shape[0]
    ce = -np.log(np.maximum(probs[np.arange(n), y], PROB_CLAMP)).mean()
    gl = (probs - np.eye(w.shape[0])[y]) / n
    return ce, gl.T @ x, gl.sum(axis=0)


def grad_check(head: LinearHead, dataset: Dataset, indices, step: float = 1e-3) -> float:
    """Compare the analytic cross-entropy gradient to central differences.

    The objective is the mean cross-entropy of the head on the given
    instances (no weight-decay term).  Every parameter is perturbed by
    +/- step in float64 and the two-sided slope is compared entrywise to
    the analytic gradient.  Returns the max absolute difference divided by
    the largest gradient magnitude seen, a scale-free error that should sit
    near step**2 for a correct implementation.
    """
    idx = _check_indices(dataset, indices)
    x = dataset.features[idx].astype(np.float64)
    y = dataset.labels[idx].astype(np.int64)
    w = head.weights.copy()
    b = head.biases.copy()
    _, gw, gb = _ce_value_and_grad(w, b, x, y)

    def value(wv, bv):
        probs = _softmax(x @ wv.T + bv)
        return -np.log(np.maximum(probs[np.arange(idx.size), y], PROB_CLAMP)).mean()

    num_w = np.zeros_like(w)
    for pos in np.ndindex(*w.shape):
        wp = w.copy()
        wp[pos] += step
        wm = w.copy()
        wm[pos] -= step
        num_w[pos] = (value(wp, b) - value(wm, b)) / (2.0 * step)
    num_b = np.zeros_like(b)
    for j in range(b.size):
        bp = b.copy()
        bp[j] += step
        bm = b.copy()
        bm[j] -= step
        num_b[j] = (value(w, bp) - value(w, bm)) / (2.0 * step)

    diff = max(np.abs(gw - num_w).max(), np.abs(gb - num_b).max())
    scale = max(
        np.abs(gw).max(), np.abs(gb).max(), np.abs(num_w).max(), np.abs(num_b).max(), PROB_CLAMP
    )
    return float(diff / scale)
