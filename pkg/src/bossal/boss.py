"""Ensemble batch oracle: generate candidate batches, assess, pick the best.

The oracle splits one cycle of batch selection into two halves.  First the
strategy ensemble proposes T candidate batches, each strategy contributing
T // |ensemble| of them from independently drawn sub-pools of the unlabeled
set.  Then every candidate batch is scored by retraining the head on the
labeled set extended by the batch and measuring the resulting loss on the
held-out evaluation set; the batch with the lowest loss wins.

Each candidate batch is reproducible in isolation: its sub-pool draw and
its strategy's internal randomness derive from
mix64(seed, cycle_index, strategy_ordinal, batch_ordinal) alone.
"""

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, PoolState
from .errors import ValidationError
from .model import (
    LinearHead,
    RetrainCounter,
    TrainConfig,
    evaluate,
    predict_proba,
    train_head,
    validate_loss,
)
from .seeding import mix64
from .strategies import STRATEGY_IDS, StrategyContext, select_batch

LABEL_SOURCES = ("ground_truth", "pseudo")


@dataclass(frozen=True)
class BossConfig:
    """Oracle configuration.

    ``num_batches`` is the total candidate budget T; each strategy
    generates T // |strategies| batches, so T must be at least the ensemble
    size.  ``k_max`` bounds the sub-pool size drawn per candidate batch;
    when None it defaults to min(|unlabeled|, max(1000, 10 * b)) at
    generation time.  ``assess_epochs`` is the shortened retraining budget
    used while scoring candidates, independent of the post-cycle budget.
    """

    strategies: tuple = STRATEGY_IDS
    num_batches: int = 100
    k_max: int | None = None
    assess_epochs: int = 50
    loss: str = "zero_one"
    label_source: str = "ground_truth"
    seed: int = 0

    def __post_init__(self):
        strategies = tuple(self.strategies)
        object.__setattr__(self, "strategies", strategies)
        if not strategies:
            raise ValidationError("ensemble must contain at least one strategy")
        for s in strategies:
            if s not in STRATEGY_IDS:
                raise ValidationError(f"unknown strategy {s!r} in ensemble")
        if len(set(strategies)) != len(strategies):
            raise ValidationError("ensemble contains a duplicate strategy")
        if self.num_batches < len(strategies):
            raise ValidationError(
                f"num_batches={self.num_batches} is below the ensemble size "
                f"{len(strategies)}; every strategy needs at least one batch"
            )
        if self.k_max is not None and self.k_max < 1:
            raise ValidationError("k_max must be positive when given")
        if self.assess_epochs < 1:
            raise ValidationError("assess_epochs must be at least 1")
        validate_loss(self.loss)
        if self.label_source not in LABEL_SOURCES:
            raise ValidationError(
                f"label_source must be one of {LABEL_SOURCES}"
            )

    @property
    def batches_per_strategy(self) -> int:
        return self.num_batches // len(self.strategies)


@dataclass
class CandidateBatch:
    """A proposed batch, its provenance, and (once assessed) its score."""

    indices: np.ndarray
    origin: str
    candidate_pool_size: int
    score: float | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ValidationError("candidate batch is empty")
        if np.unique(idx).size != idx.size:
            raise ValidationError("candidate batch contains duplicates")
        self.indices = idx


def effective_k_max(cfg: BossConfig, b: int, unlabeled_size: int) -> int:
    """Upper bound for the per-batch sub-pool draw."""
    cap = cfg.k_max if cfg.k_max is not None else max(1000, 10 * b)
    return max(b, min(unlabeled_size, cap))


def generate_candidate_batches(
    pool: PoolState,
    dataset: Dataset,
    head: LinearHead,
    b: int,
    cfg: BossConfig,
    cycle_index: int = 0,
) -> list:
    """Propose T // |ensemble| batches per strategy from random sub-pools.

    For each (strategy, batch ordinal) pair a dedicated generator seeded by
    mix64(cfg.seed, cycle_index, strategy_ordinal, batch_ordinal) draws the
    sub-pool size k uniformly from [b, k_max], draws the sub-pool itself as
    a uniform k-subset of the unlabeled set, and finally yields the seed
    for the strategy's own randomness.
    """
    if b < 1:
        raise ValidationError("batch size must be at least 1")
    if pool.unlabeled.size < b:
        raise ValidationError(
            f"unlabeled pool has {pool.unlabeled.size} instances; need {b}"
        )
    hi = effective_k_max(cfg, b, int(pool.unlabeled.size))
    batches = []
    for s_ord, strategy in enumerate(cfg.strategies):
        for j in range(cfg.batches_per_strategy):
            gen = np.random.default_rng(mix64(cfg.seed, cycle_index, s_ord, j))
            k = int(gen.integers(b, hi + 1))
            sub_pool = np.sort(gen.choice(pool.unlabeled, size=k, replace=False))
            ctx = StrategyContext(
                dataset=dataset,
                labeled=pool.labeled,
                candidate_pool=sub_pool,
                head=head,
                rng_seed=int(gen.integers(1 << 63)),
            )
            indices = select_batch(strategy, ctx, b)
            batches.append(CandidateBatch(indices, strategy, k))
    return batches


def assess_batch(
    pool: PoolState,
    dataset: Dataset,
    batch: CandidateBatch,
    cfg: BossConfig,
    train_cfg: TrainConfig,
    pseudo_labels: np.ndarray | None = None,
    counter: RetrainCounter | None = None,
) -> float:
    """Score one candidate batch by retrain-and-evaluate.

    A fresh head is trained on labeled + batch for cfg.assess_epochs epochs
    (all other training hyperparameters from train_cfg) and its cfg.loss on
    the evaluation set is returned; lower is better.  Under the pseudo
    label source the batch's training labels and the evaluation targets are
    taken from ``pseudo_labels`` instead of the ground truth, which models
    selection without access to the annotator.
    """
    if np.isin(batch.indices, pool.labeled).any():
        raise ValidationError("candidate batch overlaps the labeled set")
    if not np.isin(batch.indices, pool.unlabeled).all():
        raise ValidationError("candidate batch contains non-pool instances")
    if pool.eval_set.size == 0:
        raise ValidationError("evaluation set is empty")
    train_labels = None
    eval_labels = None
    if cfg.label_source == "pseudo":
        if pseudo_labels is None:
            raise ValidationError(
                "label_source='pseudo' requires a pseudo_labels table"
            )
        pseudo = np.asarray(pseudo_labels)
        if pseudo.shape != (dataset.n,):
            raise ValidationError("pseudo_labels must cover the whole dataset")
        train_labels = dataset.labels.copy()
        train_labels[batch.indices] = pseudo[batch.indices]
        eval_labels = pseudo
    extended = np.concatenate([pool.labeled, batch.indices])
    assess_cfg = replace(train_cfg, epochs=cfg.assess_epochs)
    head = train_head(
        dataset, extended, assess_cfg, labels=train_labels, counter=counter
    )
    return float(
        evaluate(head, dataset, pool.eval_set, cfg.loss, labels=eval_labels)
    )


def select_best_batch(batches: list) -> CandidateBatch:
    """Lowest-score batch; earlier position wins exact ties."""
    if not batches:
        raise ValidationError("no candidate batches to select from")
    best = None
    for cand in batches:
        if cand.score is None:
            raise ValidationError("candidate batch has not been assessed")
        if best is None or cand.score < best.score:
            best = cand
    return best


def infer_pseudo_labels(dataset: Dataset, reference_head: LinearHead) -> np.ndarray:
    """Hard argmax labels for every instance under the reference head."""
    probs = predict_proba(reference_head, dataset, np.arange(dataset.n))
    return probs.argmax(axis=1).astype(np.int32)


def boss_select(
    pool: PoolState,
    dataset: Dataset,
    head: LinearHead,
    b: int,
    cfg: BossConfig,
    train_cfg: TrainConfig,
    cycle_index: int = 0,
    pseudo_labels: np.ndarray | None = None,
    counter: RetrainCounter | None = None,
):
    """One full oracle cycle: generate, assess every candidate, pick.

    Returns (winner, candidates) where candidates is the full assessed
    list in generation order, useful for pick-frequency reporting.
    """
    candidates = generate_candidate_batches(pool, dataset, head, b, cfg, cycle_index)
    for cand in candidates:
        cand.score = assess_batch(
            pool, dataset, cand, cfg, train_cfg, pseudo_labels, counter
        )
    winner = select_best_batch(candidates)
    return winner, candidates
