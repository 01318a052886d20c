"""Shared fixtures: small synthetic datasets and pool setups."""

import numpy as np
import pytest

from bossal.data import Dataset, PoolState, SyntheticSpec, generate_synthetic, make_splits
from bossal.model import LinearHead, TrainConfig, train_head


@pytest.fixture(scope="session")
def blobs_easy():
    """Well-separated 3-class blobs; a linear head gets these right."""
    spec = SyntheticSpec(
        num_classes=3,
        dim=4,
        per_class=40,
        cluster_spread=0.5,
        class_separation=8.0,
        seed=101,
    )
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def blobs_mixed():
    """Moderately overlapping 5-class blobs for nontrivial selection."""
    spec = SyntheticSpec(
        num_classes=5,
        dim=8,
        per_class=60,
        cluster_spread=1.2,
        class_separation=4.0,
        seed=202,
    )
    return generate_synthetic(spec)


def split_with_labeled(dataset, n_labeled, eval_fraction=0.2, seed=5):
    """Standard split plus the first n_labeled unlabeled indices acquired."""
    pool = make_splits(dataset, eval_fraction, seed)
    if n_labeled:
        pool = pool.acquire(pool.unlabeled[:n_labeled])
    return pool


def quick_head(dataset, indices, epochs=30, init_seed=1, shuffle_seed=2):
    cfg = TrainConfig(epochs=epochs, init_seed=init_seed, shuffle_seed=shuffle_seed)
    return train_head(dataset, indices, cfg)


def zero_head(dataset):
    """All-zero parameters: uniform predicted probabilities everywhere."""
    return LinearHead(
        np.zeros((dataset.num_classes, dataset.dim)),
        np.zeros(dataset.num_classes),
    )


@pytest.fixture(scope="session")
def mixed_pool_and_head(blobs_mixed):
    pool = split_with_labeled(blobs_mixed, 15)
    head = quick_head(blobs_mixed, pool.labeled)
    return pool, head
