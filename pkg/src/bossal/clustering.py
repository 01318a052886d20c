"""k-means++ seeding and Lloyd iterations shared by the geometric strategies.

Hand-rolled rather than delegated so seeding draws, tie-breaking, and the
empty-cluster rule are pinned down exactly; all of them feed deterministic
selection contracts.
"""

import numpy as np


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances; tiny negatives from rounding are clipped
    d2 = (
        (x**2).sum(axis=1)[:, None]
        - 2.0 * x @ centers.T
        + (centers**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeans_pp_indices(
    x: np.ndarray, k: int, rng: np.random.Generator, first: str = "random"
) -> np.ndarray:
    """k-means++ seeding; returns k distinct row positions of x.

    ``first`` picks the initial seed: "random" draws uniformly, "max_norm"
    takes the row with the largest Euclidean norm (ties to the lowest
    position).  Subsequent seeds are drawn with probability proportional to
    squared distance from the nearest seed so far; if every remaining row
    coincides with a seed the lowest unchosen position is taken.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    k = min(k, n)
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    if first == "max_norm":
        c0 = int(np.argmax((x**2).sum(axis=1)))
    else:
        c0 = int(rng.integers(n))
    chosen[0] = c0
    taken[c0] = True
    d2 = ((x - x[c0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            c = int(np.flatnonzero(~taken)[0])
        else:
            c = int(rng.choice(n, p=d2 / total))
            if taken[c]:
                # zero-probability rows cannot be drawn, but guard anyway
                c = int(np.flatnonzero(~taken)[0])
        chosen[i] = c
        taken[c] = True
        d2 = np.minimum(d2, ((x - x[c]) ** 2).sum(axis=1))
    return chosen


def kmeans(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 50,
    tol: float = 1e-6,
):
    """Lloyd k-means seeded by k-means++.

    Runs at most max_iter iterations, stopping early when assignments are
    stable or the largest center shift drops to tol or below.  A cluster
    that loses all members keeps its previous center.  Assignment ties go
    to the lower center id.

    Returns:
        (assignments, centers): (n,) int array and (k, D) float64 array.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    k = min(k, n)
    centers = x[kmeans_pp_indices(x, k, rng)].copy()
    assign = None
    for _ in range(max_iter):
        new_assign = _sq_dists(x, centers).argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros((k, d))
        np.add.at(sums, assign, x)
        new_centers = centers.copy()
        nonempty = counts > 0
        new_centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift <= tol:
            assign = _sq_dists(x, centers).argmin(axis=1)
            break
    return assign, centers


def nearest_distinct(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """One distinct row of x per center, nearest first-come.

    Centers are visited in id order; each claims its closest not-yet-claimed
    row (distance ties to the lower position).  Requires len(x) >= len(centers).
    """
    d2 = _sq_dists(np.asarray(x, dtype=np.float64), centers)
    n, k = d2.shape
    picked = np.empty(k, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    for j in range(k):
        col = np.where(used, np.inf, d2[:, j])
        i = int(np.argmin(col))
        picked[j] = i
        used[i] = True
    return picked
