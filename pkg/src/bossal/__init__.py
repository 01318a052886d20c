"""Pool-based active-learning simulation engine over precomputed features.

The package simulates batch active learning with a linear head on frozen
feature vectors.  Batches can be chosen by classic selection strategies, by
retrain-and-compare oracles (an ensemble batch oracle plus greedy and
annealing baselines), and everything is driven by a reproducible seed tree
so runs replay bit-identically.
"""

__version__ = "0.1.0"

from .baselines import CdoConfig, SasConfig, cdo_select, sas_select
from .boss import (
    BossConfig,
    CandidateBatch,
    assess_batch,
    boss_select,
    generate_candidate_batches,
    infer_pseudo_labels,
    select_best_batch,
)
from .data import (
    Dataset,
    PoolState,
    SyntheticSpec,
    generate_synthetic,
    load_feature_file,
    make_splits,
    write_feature_file,
)
from .errors import FormatError, ValidationError
from .harness import (
    ExperimentConfig,
    LearningCurve,
    aulc,
    expected_processed_instances,
    pick_frequencies,
    relative_curve,
    run_experiment,
)
from .model import (
    LinearHead,
    RetrainCounter,
    TrainConfig,
    cosine_lr,
    evaluate,
    grad_check,
    predict_proba,
    train_head,
)
from .seeding import mix64
from .strategies import (
    STRATEGY_IDS,
    StrategyContext,
    select_batch,
)

__all__ = [
    "BossConfig",
    "CandidateBatch",
    "CdoConfig",
    "Dataset",
    "ExperimentConfig",
    "FormatError",
    "LearningCurve",
    "LinearHead",
    "PoolState",
    "RetrainCounter",
    "STRATEGY_IDS",
    "SasConfig",
    "StrategyContext",
    "SyntheticSpec",
    "TrainConfig",
    "ValidationError",
    "assess_batch",
    "aulc",
    "boss_select",
    "cdo_select",
    "cosine_lr",
    "evaluate",
    "expected_processed_instances",
    "generate_candidate_batches",
    "generate_synthetic",
    "grad_check",
    "infer_pseudo_labels",
    "load_feature_file",
    "make_splits",
    "mix64",
    "pick_frequencies",
    "predict_proba",
    "relative_curve",
    "run_experiment",
    "sas_select",
    "select_batch",
    "select_best_batch",
    "train_head",
    "write_feature_file",
]
