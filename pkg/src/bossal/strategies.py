"""Batch selection strategies over a candidate pool.

Every strategy implements the same contract: given a context (dataset,
labeled set, candidate pool, current head, seed) and a batch size b, return
b distinct candidate-pool indices.  Selection is deterministic for a fixed
context and treats the candidate pool as a set: the pool is canonicalized
to ascending order, so permuting it does not change the output.

Tie-breaking is uniform across strategies: whenever scores tie, the lower
dataset index wins.  Only the two ``*_sup`` diagnostics may read labels of
unlabeled instances, and they must do so through the guarded accessor.
"""

from dataclasses import dataclass, replace

import numpy as np

from .clustering import kmeans, kmeans_pp_indices, nearest_distinct
from .data import Dataset
from .errors import ValidationError
from .model import LinearHead, predict_proba

STRATEGY_IDS = (
    "random",
    "margin",
    "coreset",
    "badge",
    "bait",
    "typiclust",
    "alfamix",
    "dropquery",
    "typiclust_sup",
    "dropquery_sup",
)

SUPERVISED_IDS = frozenset({"typiclust_sup", "dropquery_sup"})

ALFAMIX_ALPHA = 0.2
BAIT_REG = 1e-2
DROPQUERY_TRIALS = 10
DROPQUERY_RATE = 0.5
TYPICALITY_NEIGHBORS = 20


@dataclass(frozen=True)
class StrategyContext:
    """Everything a strategy may look at when choosing a batch.

    ``labeled`` and ``candidate_pool`` are canonicalized to sorted
    ascending order at construction.  ``pool_label_access`` is managed by
    the dispatcher; strategies read candidate labels only through
    ``pool_labels`` which enforces it.
    """

    dataset: Dataset
    labeled: np.ndarray
    candidate_pool: np.ndarray
    head: LinearHead
    rng_seed: int
    pool_label_access: bool = False

    def __post_init__(self):
        for field in ("labeled", "candidate_pool"):
            arr = np.sort(np.asarray(getattr(self, field), dtype=np.int64).ravel())
            if arr.size:
                if arr[0] < 0 or arr[-1] >= self.dataset.n:
                    raise ValidationError(f"{field} index outside dataset range")
                if (np.diff(arr) == 0).any():
                    raise ValidationError(f"duplicate index in {field}")
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)
        if np.intersect1d(self.labeled, self.candidate_pool).size:
            raise ValidationError("candidate pool overlaps the labeled set")
        if self.head.dim != self.dataset.dim:
            raise ValidationError("head dimension does not match dataset")
        if self.head.num_classes != self.dataset.num_classes:
            raise ValidationError("head class count does not match dataset")

    def pool_labels(self) -> np.ndarray:
        """Ground-truth labels of the candidate pool; supervised-only."""
        if not self.pool_label_access:
            raise ValidationError(
                "strategy is not allowed to read labels of unlabeled instances"
            )
        return self.dataset.labels[self.candidate_pool]


def _pool_feats(ctx: StrategyContext) -> np.ndarray:
    return ctx.dataset.features[ctx.candidate_pool].astype(np.float64)


def _margin_scores(ctx: StrategyContext) -> np.ndarray:
    probs = predict_proba(ctx.head, ctx.dataset, ctx.candidate_pool)
    k = probs.shape[1]
    if k < 2:
        return np.zeros(probs.shape[0])
    part = np.partition(probs, k - 2, axis=1)
    return part[:, -1] - part[:, -2]


def _margin_order(ctx: StrategyContext) -> np.ndarray:
    # ascending margin; ties resolve to the lower pool position, which is
    # the lower dataset index because the pool is sorted
    scores = _margin_scores(ctx)
    return np.lexsort((np.arange(scores.size), scores))


def select_random(ctx: StrategyContext, b: int) -> np.ndarray:
    rng = np.random.default_rng(ctx.rng_seed)
    return rng.choice(ctx.candidate_pool, size=b, replace=False)


def select_margin(ctx: StrategyContext, b: int) -> np.ndarray:
    """Smallest top1-top2 probability gap first."""
    return ctx.candidate_pool[_margin_order(ctx)[:b]]


def select_coreset(ctx: StrategyContext, b: int) -> np.ndarray:
    """Greedy k-center cover of the candidate pool in feature space.

    Each pick maximizes the distance to the nearest already-covered point,
    where covered means labeled or previously picked.  With an empty
    labeled set the first pick is the candidate farthest from the pool
    centroid.
    """
    pool = ctx.candidate_pool
    feats = _pool_feats(ctx)
    picks = []
    if ctx.labeled.size:
        lab = ctx.dataset.features[ctx.labeled].astype(np.float64)
        d2 = (
            (feats**2).sum(axis=1)[:, None]
            - 2.0 * feats @ lab.T
            + (lab**2).sum(axis=1)[None, :]
        )
        mind2 = np.maximum(d2, 0.0).min(axis=1)
    else:
        centroid = feats.mean(axis=0)
        d2c = ((feats - centroid) ** 2).sum(axis=1)
        first = int(np.argmax(d2c))
        picks.append(first)
        mind2 = ((feats - feats[first]) ** 2).sum(axis=1)
        mind2[first] = -1.0
    while len(picks) < b:
        j = int(np.argmax(mind2))
        picks.append(j)
        mind2 = np.minimum(mind2, ((feats - feats[j]) ** 2).sum(axis=1))
        mind2[j] = -1.0
    return pool[np.asarray(picks, dtype=np.int64)]


def select_badge(ctx: StrategyContext, b: int) -> np.ndarray:
    """k-means++ seeding in last-layer gradient-embedding space.

    The embedding of a candidate is (p - onehot(argmax p)) outer its
    feature vector, flattened; the first seed is the largest-norm
    embedding and the rest follow D^2 sampling.
    """
    pool = ctx.candidate_pool
    probs = predict_proba(ctx.head, ctx.dataset, pool)
    m, k = probs.shape
    grad = probs.copy()
    grad[np.arange(m), probs.argmax(axis=1)] -= 1.0
    feats = _pool_feats(ctx)
    emb = (grad[:, :, None] * feats[:, None, :]).reshape(m, k * ctx.dataset.dim)
    rng = np.random.default_rng(ctx.rng_seed)
    seeds = kmeans_pp_indices(emb, b, rng, first="max_norm")
    return pool[seeds]


def select_bait(ctx: StrategyContext, b: int) -> np.ndarray:
    """Greedy Fisher-information gain with rank-one inverse updates.

    Working in bias-augmented feature space h~ = [h; 1], the information
    state is M = reg * I + sum pi_x h~ h~^T over labeled plus already
    picked instances, with pi_x = 1 - max_c p(c|x).  Each step picks the
    candidate maximizing log(1 + pi * h~^T M^-1 h~), then folds it into M
    via Sherman-Morrison.
    """
    pool = ctx.candidate_pool
    feats = _pool_feats(ctx)
    m = feats.shape[0]
    aug = np.hstack([feats, np.ones((m, 1))])
    probs = predict_proba(ctx.head, ctx.dataset, pool)
    pi = 1.0 - probs.max(axis=1)

    dim = aug.shape[1]
    info = BAIT_REG * np.eye(dim)
    if ctx.labeled.size:
        lab_feats = ctx.dataset.features[ctx.labeled].astype(np.float64)
        lab_aug = np.hstack([lab_feats, np.ones((ctx.labeled.size, 1))])
        lab_pi = 1.0 - predict_proba(ctx.head, ctx.dataset, ctx.labeled).max(axis=1)
        info += (lab_aug * lab_pi[:, None]).T @ lab_aug
    inv = np.linalg.inv(info)
    quad = ((aug @ inv) * aug).sum(axis=1)

    picks = []
    available = np.ones(m, dtype=bool)
    for _ in range(b):
        gain = np.log1p(pi * quad)
        gain[~available] = -np.inf
        j = int(np.argmax(gain))
        picks.append(j)
        available[j] = False
        v = inv @ aug[j]
        denom = 1.0 + pi[j] * quad[j]
        inv -= pi[j] * np.outer(v, v) / denom
        w = aug @ v
        quad -= pi[j] * w * w / denom
    return pool[np.asarray(picks, dtype=np.int64)]


def _typicality(points: np.ndarray) -> np.ndarray:
    """1 / (mean distance to the min(20, n-1) nearest neighbors + 1e-8)."""
    n = points.shape[0]
    if n == 1:
        return np.array([1.0 / 1e-8])
    d2 = (
        (points**2).sum(axis=1)[:, None]
        - 2.0 * points @ points.T
        + (points**2).sum(axis=1)[None, :]
    )
    dists = np.sqrt(np.maximum(d2, 0.0))
    kn = min(TYPICALITY_NEIGHBORS, n - 1)
    ordered = np.sort(dists, axis=1)[:, 1 : kn + 1]  # drop self-distance at col 0
    return 1.0 / (ordered.mean(axis=1) + 1e-8)


def _round_robin_typical(ranked_clusters, b):
    """ranked_clusters: list of candidate-position arrays, most-typical first.

    Visits clusters in rank order, one pick per cluster per round, until b
    positions are collected or every cluster is exhausted.
    """
    cursors = [0] * len(ranked_clusters)
    picks = []
    while len(picks) < b:
        progressed = False
        for ci, members in enumerate(ranked_clusters):
            if len(picks) == b:
                break
            if cursors[ci] < len(members):
                picks.append(int(members[cursors[ci]]))
                cursors[ci] += 1
                progressed = True
        if not progressed:
            break
    return picks


def select_typiclust(ctx: StrategyContext, b: int) -> np.ndarray:
    """Cluster labeled plus candidates into |labeled| + b groups, then take
    the most typical candidate from the largest purely-unlabeled clusters,
    round-robin until the batch is full.

    Typicality is the inverse mean distance to a point's nearest in-cluster
    neighbors.  Clusters containing a labeled instance are only drawn from
    after every purely-unlabeled cluster is exhausted.
    """
    pool = ctx.candidate_pool
    n_lab = int(ctx.labeled.size)
    pts = np.vstack(
        [
            ctx.dataset.features[ctx.labeled].astype(np.float64),
            _pool_feats(ctx),
        ]
    )
    k = n_lab + b
    rng = np.random.default_rng(ctx.rng_seed)
    assign, _ = kmeans(pts, k, rng)
    k_eff = int(assign.max()) + 1 if assign.size else 0

    eligible = []
    fallback = []
    for j in range(k_eff):
        members = np.flatnonzero(assign == j)
        cand_mask = members >= n_lab
        if not cand_mask.any():
            continue
        entry = (j, members, cand_mask)
        (eligible if cand_mask.all() else fallback).append(entry)

    ranked = []
    for group in (eligible, fallback):
        group.sort(key=lambda e: (-int(e[2].sum()), e[0]))
        for j, members, cand_mask in group:
            typ_all = _typicality(pts[members])
            cand_members = members[cand_mask] - n_lab
            cand_typ = typ_all[cand_mask]
            order = np.lexsort((cand_members, -cand_typ))
            ranked.append(cand_members[order])
    picks = _round_robin_typical(ranked, b)
    return pool[np.asarray(picks, dtype=np.int64)]


def select_typiclust_sup(ctx: StrategyContext, b: int) -> np.ndarray:
    """TypiClust with ground-truth label groups in place of k-means clusters.

    Diagnostic upper-reference: clusters the candidate pool by its true
    labels (guarded access), ranks groups by size, and round-robins the
    most typical member of each group.
    """
    labels = ctx.pool_labels()
    feats = _pool_feats(ctx)
    ranked = []
    groups = [
        (int(v), np.flatnonzero(labels == v)) for v in np.unique(labels)
    ]
    groups.sort(key=lambda e: (-e[1].size, e[0]))
    for _, members in groups:
        typ = _typicality(feats[members])
        order = np.lexsort((members, -typ))
        ranked.append(members[order])
    picks = _round_robin_typical(ranked, b)
    return ctx.candidate_pool[np.asarray(picks, dtype=np.int64)]


def select_alfamix(ctx: StrategyContext, b: int) -> np.ndarray:
    """Anchor-mixing inconsistency test followed by k-means coverage.

    For every class anchor (mean labeled feature of that class), each
    candidate is tested at the fixed mixing ratio alpha = 0.2: if the head
    labels alpha * anchor + (1 - alpha) * candidate differently from the
    candidate alone, the candidate is inconsistent.  Inconsistent
    candidates are clustered with k-means (k = b) and the one nearest each
    center is taken; with fewer than b inconsistents the remainder is
    filled in margin order.  With no labeled anchors or no inconsistents
    the strategy degrades to margin.
    """
    if ctx.labeled.size == 0:
        return select_margin(ctx, b)
    pool = ctx.candidate_pool
    feats = _pool_feats(ctx)
    w, bias = ctx.head.weights, ctx.head.biases
    clean = (feats @ w.T + bias).argmax(axis=1)
    lab_labels = ctx.dataset.labels[ctx.labeled]
    lab_feats = ctx.dataset.features[ctx.labeled].astype(np.float64)
    inconsistent = np.zeros(feats.shape[0], dtype=bool)
    for c in np.unique(lab_labels):
        anchor = lab_feats[lab_labels == c].mean(axis=0)
        mixed = ALFAMIX_ALPHA * anchor + (1.0 - ALFAMIX_ALPHA) * feats
        inconsistent |= (mixed @ w.T + bias).argmax(axis=1) != clean
    inc = np.flatnonzero(inconsistent)
    if inc.size == 0:
        return select_margin(ctx, b)
    if inc.size >= b:
        rng = np.random.default_rng(ctx.rng_seed)
        _, centers = kmeans(feats[inc], b, rng)
        picks = inc[nearest_distinct(feats[inc], centers)]
        return pool[picks]
    picks = list(inc)
    taken = set(picks)
    for pos in _margin_order(ctx):
        if len(picks) == b:
            break
        if int(pos) not in taken:
            picks.append(int(pos))
    return pool[np.asarray(picks, dtype=np.int64)]


def _dropquery_counts(ctx: StrategyContext, rng: np.random.Generator):
    """Prediction-flip counts over random feature-dropout trials."""
    feats = _pool_feats(ctx)
    w, bias = ctx.head.weights, ctx.head.biases
    clean = (feats @ w.T + bias).argmax(axis=1)
    m, d = feats.shape
    drop = rng.random((DROPQUERY_TRIALS, m, d)) < DROPQUERY_RATE
    counts = np.zeros(m, dtype=np.int64)
    scale = 1.0 / (1.0 - DROPQUERY_RATE)
    for t in range(DROPQUERY_TRIALS):
        corrupted = np.where(drop[t], 0.0, feats) * scale
        counts += (corrupted @ w.T + bias).argmax(axis=1) != clean
    return counts


def select_dropquery(ctx: StrategyContext, b: int) -> np.ndarray:
    """Query the candidates whose prediction is unstable under dropout.

    Ten trials zero each feature coordinate independently with probability
    0.5 (survivors rescaled by 2); candidates whose argmax flips in at
    least one trial form the query set (all candidates if none flip).
    k-means representatives of the query set are picked; if the query set
    is smaller than b it is taken whole and the remainder comes from
    k-means representatives of the stable candidates.
    """
    pool = ctx.candidate_pool
    feats = _pool_feats(ctx)
    rng = np.random.default_rng(ctx.rng_seed)
    counts = _dropquery_counts(ctx, rng)
    query = np.flatnonzero(counts >= 1)
    if query.size == 0:
        query = np.arange(feats.shape[0])
    if query.size >= b:
        _, centers = kmeans(feats[query], b, rng)
        return pool[query[nearest_distinct(feats[query], centers)]]
    picks = list(query)
    rest = np.setdiff1d(np.arange(feats.shape[0]), query)
    need = b - query.size
    _, centers = kmeans(feats[rest], need, rng)
    picks.extend(rest[nearest_distinct(feats[rest], centers)])
    return pool[np.asarray(picks, dtype=np.int64)]


def select_dropquery_sup(ctx: StrategyContext, b: int) -> np.ndarray:
    """DropQuery with class-balanced picks using true pool labels.

    The dropout query set is formed exactly as in the unsupervised variant,
    then grouped by ground-truth label (guarded access).  Groups are
    visited largest first, round-robin, taking the most flip-prone member
    each time; if the query set runs out the stable candidates are grouped
    and drained the same way.
    """
    pool = ctx.candidate_pool
    labels = ctx.pool_labels()
    rng = np.random.default_rng(ctx.rng_seed)
    counts = _dropquery_counts(ctx, rng)
    query_mask = counts >= 1
    if not query_mask.any():
        query_mask[:] = True

    def grouped(positions, key_counts):
        groups = [
            (int(v), positions[labels[positions] == v])
            for v in np.unique(labels[positions])
        ]
        groups.sort(key=lambda e: (-e[1].size, e[0]))
        ordered = []
        for _, members in groups:
            order = np.lexsort((members, -key_counts[members]))
            ordered.append(members[order])
        return ordered

    picks = _round_robin_typical(grouped(np.flatnonzero(query_mask), counts), b)
    if len(picks) < b:
        rest = np.flatnonzero(~query_mask)
        picks.extend(
            _round_robin_typical(grouped(rest, counts), b - len(picks))
        )
    return pool[np.asarray(picks, dtype=np.int64)]


_SELECTORS = {
    "random": select_random,
    "margin": select_margin,
    "coreset": select_coreset,
    "badge": select_badge,
    "bait": select_bait,
    "typiclust": select_typiclust,
    "alfamix": select_alfamix,
    "dropquery": select_dropquery,
    "typiclust_sup": select_typiclust_sup,
    "dropquery_sup": select_dropquery_sup,
}


def select_batch(strategy: str, ctx: StrategyContext, b: int) -> np.ndarray:
    """Run one strategy and enforce the output contract.

    Returns b distinct indices drawn from ctx.candidate_pool.  Label access
    for the candidate pool is granted if and only if the strategy is one of
    the supervised diagnostics.
    """
    if strategy not in _SELECTORS:
        raise ValidationError(
            f"unknown strategy {strategy!r}; expected one of {STRATEGY_IDS}"
        )
    if int(b) < 1:
        raise ValidationError("batch size must be at least 1")
    b = int(b)
    if ctx.candidate_pool.size < b:
        raise ValidationError(
            f"candidate pool has {ctx.candidate_pool.size} instances; need {b}"
        )
    need_labels = strategy in SUPERVISED_IDS
    if ctx.pool_label_access != need_labels:
        ctx = replace(ctx, pool_label_access=need_labels)
    batch = np.asarray(_SELECTORS[strategy](ctx, b), dtype=np.int64)
    if batch.shape != (b,):
        raise ValidationError(f"strategy {strategy} returned {batch.shape[0]} picks")
    if np.unique(batch).size != b:
        raise ValidationError(f"strategy {strategy} returned duplicate picks")
    if not np.isin(batch, ctx.candidate_pool).all():
        raise ValidationError(f"strategy {strategy} picked outside the pool")
    return batch
