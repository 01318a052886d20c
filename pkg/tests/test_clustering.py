"""Seeding and Lloyd iteration helpers behind the geometric strategies."""

import numpy as np

from bossal.clustering import _sq_dists, kmeans, kmeans_pp_indices, nearest_distinct


def blobs(rng, centers, per, spread=0.1):
    pts = []
    for c in centers:
        pts.append(np.asarray(c) + rng.normal(scale=spread, size=(per, len(c))))
    return np.concatenate(pts)


class TestSquaredDistances:
    def test_matches_direct_computation(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(12, 5))
        c = rng.normal(size=(4, 5))
        direct = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        np.testing.assert_allclose(_sq_dists(x, c), direct, atol=1e-10)

    def test_never_negative(self):
        x = np.full((6, 3), 1e8)
        assert (_sq_dists(x, x[:2]) >= 0.0).all()


class TestSeeding:
    def test_returns_distinct_positions(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(30, 4))
        idx = kmeans_pp_indices(x, 10, rng)
        assert len(idx) == 10
        assert len(set(idx.tolist())) == 10
        assert idx.min() >= 0 and idx.max() < 30

    def test_max_norm_first(self):
        x = np.array([[0.1, 0.0], [5.0, 5.0], [0.0, 0.2], [1.0, 1.0]])
        rng = np.random.default_rng(2)
        idx = kmeans_pp_indices(x, 2, rng, first="max_norm")
        assert idx[0] == 1

    def test_k_clamps_to_n(self):
        x = np.random.default_rng(3).normal(size=(4, 2))
        idx = kmeans_pp_indices(x, 10, np.random.default_rng(0))
        assert sorted(idx.tolist()) == [0, 1, 2, 3]

    def test_duplicate_rows_fall_back_to_lowest_unchosen(self):
        x = np.zeros((5, 2))
        idx = kmeans_pp_indices(x, 3, np.random.default_rng(4))
        assert len(set(idx.tolist())) == 3

    def test_spread_rows_preferred(self):
        # Two tight far-apart groups: the second seed lands in the group
        # the first seed is not in, nearly surely.
        rng = np.random.default_rng(5)
        x = blobs(rng, [[0.0, 0.0], [100.0, 0.0]], per=10, spread=0.01)
        hits = 0
        for trial in range(50):
            idx = kmeans_pp_indices(x, 2, np.random.default_rng(100 + trial))
            groups = {int(i) // 10 for i in idx}
            hits += groups == {0, 1}
        assert hits >= 48

    def test_deterministic_given_rng_state(self):
        x = np.random.default_rng(6).normal(size=(25, 3))
        a = kmeans_pp_indices(x, 5, np.random.default_rng(7))
        b = kmeans_pp_indices(x, 5, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


class TestKmeans:
    def test_recovers_separated_blobs(self):
        rng = np.random.default_rng(8)
        x = blobs(rng, [[0, 0], [50, 0], [0, 50]], per=20, spread=0.5)
        assign, centers = kmeans(x, 3, np.random.default_rng(9))
        # Each true group maps to exactly one cluster id.
        ids = [set(assign[i * 20 : (i + 1) * 20].tolist()) for i in range(3)]
        assert all(len(s) == 1 for s in ids)
        assert len(ids[0] | ids[1] | ids[2]) == 3

    def test_assignments_are_nearest_center(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(40, 3))
        assign, centers = kmeans(x, 5, np.random.default_rng(11))
        d2 = _sq_dists(x, centers)
        np.testing.assert_array_equal(assign, d2.argmin(axis=1))

    def test_shapes(self):
        x = np.random.default_rng(12).normal(size=(15, 4))
        assign, centers = kmeans(x, 6, np.random.default_rng(13))
        assert assign.shape == (15,)
        assert centers.shape == (6, 4)

    def test_k_larger_than_n(self):
        x = np.random.default_rng(14).normal(size=(3, 2))
        assign, centers = kmeans(x, 7, np.random.default_rng(15))
        assert centers.shape == (3, 2)
        assert set(assign.tolist()) <= {0, 1, 2}

    def test_deterministic(self):
        x = np.random.default_rng(16).normal(size=(30, 4))
        a1, c1 = kmeans(x, 4, np.random.default_rng(17))
        a2, c2 = kmeans(x, 4, np.random.default_rng(17))
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(c1, c2)

    def test_single_cluster_center_is_mean(self):
        x = np.random.default_rng(18).normal(size=(20, 3))
        assign, centers = kmeans(x, 1, np.random.default_rng(19))
        assert (assign == 0).all()
        np.testing.assert_allclose(centers[0], x.mean(axis=0), atol=1e-9)


class TestNearestDistinct:
    def test_claims_in_center_order(self):
        x = np.array([[0.0], [1.0], [2.0]])
        centers = np.array([[0.9], [1.1]])
        picked = nearest_distinct(x, centers)
        # First center claims row 1; second must skip it and take row 2.
        assert picked.tolist() == [1, 2]

    def test_distinct_rows(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=(10, 2))
        centers = x[[3, 3, 3]] + 1e-9
        picked = nearest_distinct(x, centers)
        assert len(set(picked.tolist())) == 3
        assert picked[0] == 3

    def test_tie_goes_to_lower_row(self):
        x = np.array([[1.0], [1.0], [5.0]])
        picked = nearest_distinct(x, np.array([[1.0]]))
        assert picked.tolist() == [0]
