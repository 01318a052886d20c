"""Single-instance and annealing baselines for oracle comparisons.

Both baselines share the oracle's retrain-and-evaluate scoring primitive
but explore the batch space differently: CDO builds the batch one instance
at a time by trying a small random sample per slot, SAS anneals over whole
b-subsets with single-swap proposals.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from .boss import CandidateBatch
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


@dataclass(frozen=True)
class CdoConfig:
    """Greedy per-instance oracle: m candidates tried per slot."""

    m: int = 20
    assess_epochs: int = 50
    loss: str = "zero_one"
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("m must be at least 1")
        if self.assess_epochs < 1:
            raise ValidationError("assess_epochs must be at least 1")
        validate_loss(self.loss)


@dataclass(frozen=True)
class SasConfig:
    """Simulated annealing over b-subsets with a geometric temperature decay."""

    anneal_steps: int = 1250
    greedy_steps: int = 250
    temp_start: float = 1.0
    temp_end: float = 0.01
    assess_epochs: int = 50
    loss: str = "zero_one"
    seed: int = 0

    def __post_init__(self):
        if self.anneal_steps < 1:
            raise ValidationError("anneal_steps must be at least 1")
        if self.greedy_steps < 0:
            raise ValidationError("greedy_steps must be non-negative")
        if not (0 < self.temp_end <= self.temp_start):
            raise ValidationError("need 0 < temp_end <= temp_start")
        if self.assess_epochs < 1:
            raise ValidationError("assess_epochs must be at least 1")
        validate_loss(self.loss)


@dataclass
class CdoStep:
    """Trace record of one greedy slot: what was sampled and what was taken."""

    sample: np.ndarray
    scores: np.ndarray
    pre_score: float
    chosen: int
    improved: bool


def _margins(head: LinearHead, dataset: Dataset, indices) -> np.ndarray:
    probs = predict_proba(head, dataset, indices)
    k = probs.shape[1]
    if k < 2:
        return np.zeros(probs.shape[0])
    part = np.partition(probs, k - 2, axis=1)
    return part[:, -1] - part[:, -2]


def cdo_select(
    pool: PoolState,
    dataset: Dataset,
    head: LinearHead,
    b: int,
    cfg: CdoConfig,
    train_cfg: TrainConfig,
    counter: RetrainCounter | None = None,
    trace: list | None = None,
) -> CandidateBatch:
    """Greedy one-instance-at-a-time batch construction.

    For each of the b slots, m unlabeled candidates are sampled
    uniformly; each is scored by retraining on labeled-so-far plus that one
    candidate and evaluating cfg.loss on the eval set.  If the best sampled
    candidate strictly improves on the running score, it is committed;
    otherwise the sampled candidate with the smallest prediction margin
    under the incoming head is committed instead.  The running score starts
    at the incoming head's own eval loss and becomes the committed
    candidate's assessed loss after every slot.

    Each slot retrains m times on |labeled| + 1 ... instances, so
    a full run costs m * (b * |labeled| + b * (b + 1) / 2)
    processed instances.  Ties in scores and margins resolve to the lowest
    dataset index.  Pass ``trace`` to capture per-slot CdoStep records.
    """
    if b < 1:
        raise ValidationError("batch size must be at least 1")
    if pool.unlabeled.size < b:
        raise ValidationError(
            f"unlabeled pool has {pool.unlabeled.size} instances; need {b}"
        )
    assess_cfg = replace(train_cfg, epochs=cfg.assess_epochs)
    rng = np.random.default_rng(cfg.seed)
    cur_labeled = pool.labeled
    cur_unlabeled = pool.unlabeled
    prev_score = evaluate(head, dataset, pool.eval_set, cfg.loss)
    committed = []
    for _ in range(b):
        m_eff = min(cfg.m, int(cur_unlabeled.size))
        sample = np.sort(rng.choice(cur_unlabeled, size=m_eff, replace=False))
        scores = np.empty(m_eff)
        for i, cand in enumerate(sample):
            trial = np.concatenate([cur_labeled, [cand]])
            trial_head = train_head(dataset, trial, assess_cfg, counter=counter)
            scores[i] = evaluate(trial_head, dataset, pool.eval_set, cfg.loss)
        best = int(np.argmin(scores))
        improved = bool(scores[best] < prev_score)
        if improved:
            pos = best
        else:
            pos = int(np.argmin(_margins(head, dataset, sample)))
        chosen = int(sample[pos])
        if trace is not None:
            trace.append(
                CdoStep(sample, scores.copy(), prev_score, chosen, improved)
            )
        prev_score = float(scores[pos])
        committed.append(chosen)
        cur_labeled = np.concatenate([cur_labeled, [chosen]])
        cur_unlabeled = cur_unlabeled[cur_unlabeled != chosen]
    return CandidateBatch(
        np.asarray(committed, dtype=np.int64),
        "cdo",
        cfg.m,
        score=prev_score,
    )


def sas_select(
    pool: PoolState,
    dataset: Dataset,
    head: LinearHead,
    b: int,
    cfg: SasConfig,
    train_cfg: TrainConfig,
    counter: RetrainCounter | None = None,
) -> CandidateBatch:
    """Simulated annealing over whole batches, returning the best state seen.

    The state is a b-subset of the unlabeled pool, scored by retraining on
    labeled + state and evaluating cfg.loss.  Annealing spends exactly
    anneal_steps assessments: step 0 scores the random initial state, then
    anneal_steps - 1 single-swap proposals are assessed and accepted when
    not worse, or with probability exp(-delta / temp) when worse (the
    uniform draw happens only for uphill proposals).  Temperature decays
    geometrically from temp_start to temp_end across the proposal steps.
    greedy_steps further proposals accept only strict improvements.  The
    run therefore retrains anneal_steps + greedy_steps times on
    |labeled| + b instances each.

    When the unlabeled pool is exactly b instances no swap exists; the
    single possible state is assessed once and returned.
    """
    if b < 1:
        raise ValidationError("batch size must be at least 1")
    unlabeled = pool.unlabeled
    if unlabeled.size < b:
        raise ValidationError(
            f"unlabeled pool has {unlabeled.size} instances; need {b}"
        )
    assess_cfg = replace(train_cfg, epochs=cfg.assess_epochs)

    def assess(state: np.ndarray) -> float:
        extended = np.concatenate([pool.labeled, state])
        h = train_head(dataset, extended, assess_cfg, counter=counter)
        return float(evaluate(h, dataset, pool.eval_set, cfg.loss))

    rng = np.random.default_rng(cfg.seed)
    state = np.sort(rng.choice(unlabeled, size=b, replace=False))
    obj = assess(state)
    best_state, best_obj = state, obj
    if unlabeled.size == b:
        return CandidateBatch(best_state, "sas-batch", int(unlabeled.size), best_obj)

    def propose():
        pos = int(rng.integers(b))
        complement = np.setdiff1d(unlabeled, state, assume_unique=True)
        incoming = int(complement[int(rng.integers(complement.size))])
        return np.sort(np.append(np.delete(state, pos), incoming))

    s = cfg.anneal_steps
    for t in range(1, s):
        temp = cfg.temp_start * (cfg.temp_end / cfg.temp_start) ** (t / (s - 1))
        cand = propose()
        cand_obj = assess(cand)
        delta = cand_obj - obj
        if delta <= 0 or rng.random() < math.exp(-delta / temp):
            state, obj = cand, cand_obj
        if cand_obj < best_obj:
            best_state, best_obj = cand, cand_obj
    for _ in range(cfg.greedy_steps):
        cand = propose()
        cand_obj = assess(cand)
        if cand_obj < obj:
            state, obj = cand, cand_obj
        if cand_obj < best_obj:
            best_state, best_obj = cand, cand_obj
    return CandidateBatch(best_state, "sas-batch", int(unlabeled.size), best_obj)
