"""Experiment harness: repeated active-learning simulations over one dataset.

A simulation starts from an empty labeled set, acquires a random initial
batch of b instances (cycle 0), then runs A acquisition cycles.  Each cycle
selects a batch with the configured selector, acquires it, and retrains the
head from scratch on the grown labeled set.  Curve accuracies are always
ground-truth zero-one accuracy on the held-out evaluation set, even when a
selector internally works with pseudo labels or a different loss.

Every random stream derives from the master seed through mix64; the
derivation paths are fixed here and documented in docs/FORMATS.md, so a
repetition can be replayed bit-identically from (config, dataset) alone.
Repetition r uses rep_seed = mix64(master_seed, r); the eval split is
shared by all repetitions.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace, field

import numpy as np

from .baselines import CdoConfig, SasConfig, cdo_select, sas_select
from .boss import BossConfig, boss_select, infer_pseudo_labels
from .data import Dataset, PoolState, make_splits
from .errors import ValidationError
from .model import RetrainCounter, TrainConfig, evaluate, train_head
from .seeding import mix64
from .strategies import STRATEGY_IDS, StrategyContext, select_batch

SELECTOR_KINDS = STRATEGY_IDS + ("boss", "cdo", "sas-batch")

# domain tags keeping derived seed families disjoint
_TAG_SPLIT = 0x53504C54
_TAG_INIT = 0x494E4954
_TAG_TRAIN = 0x54524E00
_TAG_ASSESS = 0x41535300
_TAG_SELECT = 0x53454C00
_TAG_REF = 0x52454600

AULC_REGIMES = ("full", "low", "mid", "high")
_REGIME_WINDOWS = {"low": (1, 7), "mid": (7, 14), "high": (14, 20)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment (selector x dataset x schedule).

    ``cycles`` is the number of acquisition cycles A after the random
    initial batch, so a run consumes b * (cycles + 1) labels.  Selector
    sub-configs are filled with defaults when the selector needs one and
    none is given; their ``seed`` fields are overwritten per repetition and
    cycle by the harness.  ``dataset`` is a reference consumed by the CLI
    (a feature-file path or an inline synthetic-spec mapping); library
    callers pass the materialized Dataset to run_experiment directly.
    """

    selector: str
    b: int
    cycles: int = 20
    repetitions: int = 10
    master_seed: int = 0
    eval_fraction: float = 0.2
    train: TrainConfig = field(default_factory=TrainConfig)
    boss: BossConfig | None = None
    cdo: CdoConfig | None = None
    sas: SasConfig | None = None
    dataset: object = None
    name: str = ""

    def __post_init__(self):
        if self.selector not in SELECTOR_KINDS:
            raise ValidationError(
                f"unknown selector {self.selector!r}; expected one of {SELECTOR_KINDS}"
            )
        if self.b < 1:
            raise ValidationError("b must be at least 1")
        if self.cycles < 1:
            raise ValidationError("cycles must be at least 1")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be at least 1")
        if not (0.0 < self.eval_fraction < 1.0):
            raise ValidationError("eval_fraction must lie strictly in (0, 1)")
        if self.selector == "boss" and self.boss is None:
            object.__setattr__(self, "boss", BossConfig())
        if self.selector == "cdo" and self.cdo is None:
            object.__setattr__(self, "cdo", CdoConfig())
        if self.selector == "sas-batch" and self.sas is None:
            object.__setattr__(self, "sas", SasConfig())


@dataclass
class LearningCurve:
    """Per-repetition record, indexed by cycle 0..A.

    Cycle 0 is the random initial batch; selection bookkeeping
    (picked_strategy, retrains, processed instances) is zero or empty
    there.  ``picked_strategy`` holds the winning strategy id per cycle for
    oracle runs and empty strings otherwise.
    """

    repetition: int
    accuracies: np.ndarray
    labeled_sizes: np.ndarray
    picked_strategy: list
    picked_indices: list
    retrain_counts: np.ndarray
    processed_instances: np.ndarray


def _run_repetition(cfg: ExperimentConfig, dataset: Dataset, pool0: PoolState, r: int):
    rep_seed = mix64(cfg.master_seed, r)
    init_rng = np.random.default_rng(mix64(rep_seed, _TAG_INIT))
    initial = np.sort(init_rng.choice(pool0.unlabeled, size=cfg.b, replace=False))
    pool = pool0.acquire(initial)

    def cycle_train_cfg(c):
        return replace(
            cfg.train,
            init_seed=mix64(rep_seed, _TAG_TRAIN, c, 0),
            shuffle_seed=mix64(rep_seed, _TAG_TRAIN, c, 1),
        )

    def assess_train_cfg(c):
        return replace(
            cfg.train,
            init_seed=mix64(rep_seed, _TAG_ASSESS, c, 0),
            shuffle_seed=mix64(rep_seed, _TAG_ASSESS, c, 1),
        )

    pseudo = None
    if cfg.selector == "boss" and cfg.boss.label_source == "pseudo":
        ref_cfg = replace(
            cfg.train,
            init_seed=mix64(rep_seed, _TAG_REF, 0),
            shuffle_seed=mix64(rep_seed, _TAG_REF, 1),
        )
        train_split = np.sort(np.concatenate([pool0.labeled, pool0.unlabeled]))
        reference = train_head(dataset, train_split, ref_cfg)
        pseudo = infer_pseudo_labels(dataset, reference)

    head = train_head(dataset, pool.labeled, cycle_train_cfg(0))
    n_points = cfg.cycles + 1
    accuracies = np.zeros(n_points)
    labeled_sizes = np.zeros(n_points, dtype=np.int64)
    picked_strategy = [""] * n_points
    picked_indices = [initial]
    retrains = np.zeros(n_points, dtype=np.int64)
    processed = np.zeros(n_points, dtype=np.int64)
    accuracies[0] = 1.0 - evaluate(head, dataset, pool.eval_set, "zero_one")
    labeled_sizes[0] = pool.labeled.size

    for c in range(1, cfg.cycles + 1):
        counter = RetrainCounter()
        if cfg.selector == "boss":
            bcfg = replace(cfg.boss, seed=mix64(rep_seed, _TAG_SELECT))
            winner, _ = boss_select(
                pool,
                dataset,
                head,
                cfg.b,
                bcfg,
                assess_train_cfg(c),
                cycle_index=c,
                pseudo_labels=pseudo,
                counter=counter,
            )
            batch = winner.indices
            picked_strategy[c] = winner.origin
        elif cfg.selector == "cdo":
            ccfg = replace(cfg.cdo, seed=mix64(rep_seed, _TAG_SELECT, c))
            batch = cdo_select(
                pool, dataset, head, cfg.b, ccfg, assess_train_cfg(c), counter=counter
            ).indices
        elif cfg.selector == "sas-batch":
            scfg = replace(cfg.sas, seed=mix64(rep_seed, _TAG_SELECT, c))
            batch = sas_select(
                pool, dataset, head, cfg.b, scfg, assess_train_cfg(c), counter=counter
            ).indices
        else:
            ctx = StrategyContext(
                dataset=dataset,
                labeled=pool.labeled,
                candidate_pool=pool.unlabeled,
                head=head,
                rng_seed=mix64(rep_seed, _TAG_SELECT, c),
            )
            batch = select_batch(cfg.selector, ctx, cfg.b)
        pool = pool.acquire(batch)
        head = train_head(dataset, pool.labeled, cycle_train_cfg(c))
        accuracies[c] = 1.0 - evaluate(head, dataset, pool.eval_set, "zero_one")
        labeled_sizes[c] = pool.labeled.size
        picked_indices.append(np.asarray(batch, dtype=np.int64))
        retrains[c] = counter.retrains
        processed[c] = counter.instances

    return LearningCurve(
        repetition=r,
        accuracies=accuracies,
        labeled_sizes=labeled_sizes,
        picked_strategy=picked_strategy,
        picked_indices=picked_indices,
        retrain_counts=retrains,
        processed_instances=processed,
    )


def _rep_worker(args):
    return _run_repetition(*args)


def run_experiment(cfg: ExperimentConfig, dataset: Dataset, jobs: int = 1) -> list:
    """Run all repetitions; returns LearningCurve records in repetition order.

    The eval/train split is derived from the master seed once and shared by
    every repetition.  With jobs > 1 repetitions run in separate processes;
    results are identical to the sequential order either way.
    """
    pool0 = make_splits(
        dataset, cfg.eval_fraction, mix64(cfg.master_seed, _TAG_SPLIT)
    )
    budget = cfg.b * (cfg.cycles + 1)
    if pool0.unlabeled.size < budget:
        raise ValidationError(
            f"label budget {budget} exceeds the train pool "
            f"({pool0.unlabeled.size} instances)"
        )
    tasks = [(cfg, dataset, pool0, r) for r in range(cfg.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_rep_worker, tasks))
    return [_run_repetition(*t) for t in tasks]


def aulc(accuracies, regime: str = "full") -> float:
    """Mean accuracy over a window of cycles (cycle 0 always excluded).

    full averages cycles 1..A; low, mid, and high average cycles 1..7,
    7..14, and 14..20 respectively and require at least 20 cycles.
    """
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.ndim != 1 or acc.size < 2:
        raise ValidationError("need accuracies for cycle 0 and at least one cycle")
    n_cycles = acc.size - 1
    if regime == "full":
        lo, hi = 1, n_cycles
    elif regime in _REGIME_WINDOWS:
        lo, hi = _REGIME_WINDOWS[regime]
        if n_cycles < 20:
            raise ValidationError(
                f"regime {regime!r} is defined for at least 20 cycles, got {n_cycles}"
            )
    else:
        raise ValidationError(f"unknown regime {regime!r}; expected {AULC_REGIMES}")
    return float(acc[lo : hi + 1].mean())


def relative_curve(accuracies, baseline) -> np.ndarray:
    """Pointwise accuracy difference between a run and a baseline run."""
    a = np.asarray(accuracies, dtype=np.float64)
    base = np.asarray(baseline, dtype=np.float64)
    if a.shape != base.shape:
        raise ValidationError(
            f"curve shapes differ: {a.shape} vs {base.shape}"
        )
    return a - base


def pick_frequencies(curves, strategies=None):
    """Fraction of repetitions picking each strategy, per cycle.

    Returns (strategy_ids, (A, len(strategy_ids)) matrix) whose rows sum to
    one.  All curves must carry pick records for cycles 1..A, so this is
    only meaningful for oracle runs.
    """
    if not curves:
        raise ValidationError("no curves given")
    n_cycles = len(curves[0].picked_strategy) - 1
    seen = set()
    for curve in curves:
        if len(curve.picked_strategy) != n_cycles + 1:
            raise ValidationError("curves disagree on cycle count")
        for c in range(1, n_cycles + 1):
            pick = curve.picked_strategy[c]
            if not pick:
                raise ValidationError(
                    f"repetition {curve.repetition} has no pick record at cycle {c}"
                )
            seen.add(pick)
    if strategies is None:
        strategies = sorted(seen)
    else:
        strategies = list(strategies)
        unknown = seen - set(strategies)
        if unknown:
            raise ValidationError(f"picks outside the given ensemble: {sorted(unknown)}")
    index = {s: i for i, s in enumerate(strategies)}
    freq = np.zeros((n_cycles, len(strategies)))
    for curve in curves:
        for c in range(1, n_cycles + 1):
            freq[c - 1, index[curve.picked_strategy[c]]] += 1.0
    freq /= len(curves)
    return strategies, freq


def expected_processed_instances(selector: str, b: int, labeled_size: int, cfg) -> int:
    """Closed-form selection cost (instances processed) for one cycle.

    boss: (T // |S|) * |S| * (labeled + b), one retraining per candidate
    batch on the extended labeled set.  cdo: m trials per slot on
    labeled-so-far plus one.  sas-batch: one retraining per annealing or
    greedy step on labeled + b.  Plain strategies never retrain during
    selection.
    """
    if selector == "boss":
        return cfg.batches_per_strategy * len(cfg.strategies) * (labeled_size + b)
    if selector == "cdo":
        return cfg.m * (b * labeled_size + b * (b + 1) // 2)
    if selector == "sas-batch":
        return (cfg.anneal_steps + cfg.greedy_steps) * (labeled_size + b)
    if selector in STRATEGY_IDS:
        return 0
    raise ValidationError(f"unknown selector {selector!r}")
