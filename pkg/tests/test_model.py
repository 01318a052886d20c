"""Linear head training, schedule, losses, and gradient checks."""

import numpy as np
import pytest

from bossal.data import Dataset
from bossal.errors import ValidationError
from bossal.model import (
    LOSSES,
    PROB_CLAMP,
    LinearHead,
    RetrainCounter,
    TrainConfig,
    cosine_lr,
    evaluate,
    grad_check,
    predict_proba,
    train_head,
    validate_loss,
)

from conftest import zero_head


def softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def manual_epoch(w, b, xb, yb, num_classes, lr, wd):
    """One minibatch update, the reference arithmetic for a full batch."""
    logits = xb @ w.T + b
    probs = softmax_rows(logits)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(yb)), yb] = 1.0
    g_logits = (probs - onehot) / len(yb)
    gw = g_logits.T @ xb + wd * w
    gb = g_logits.sum(axis=0)
    return w - lr * gw, b - lr * gb


class TestCosineSchedule:
    def test_first_epoch_is_base(self):
        cfg = TrainConfig(epochs=200, base_lr=0.01)
        assert cosine_lr(0, cfg) == pytest.approx(0.01)

    def test_last_epoch_value(self):
        cfg = TrainConfig(epochs=200, base_lr=0.01)
        assert cosine_lr(199, cfg) == pytest.approx(6.168376e-07, rel=1e-4)

    def test_midpoint(self):
        cfg = TrainConfig(epochs=100, base_lr=0.02)
        assert cosine_lr(50, cfg) == pytest.approx(0.01)

    def test_monotone_decreasing(self):
        cfg = TrainConfig(epochs=50, base_lr=0.01)
        vals = [cosine_lr(e, cfg) for e in range(50)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_single_epoch(self):
        cfg = TrainConfig(epochs=1, base_lr=0.01)
        assert cosine_lr(0, cfg) == pytest.approx(0.01)


def four_point_dataset():
    feats = np.array(
        [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [0.5, -1.0]], dtype=np.float32
    )
    labels = np.array([0, 1, 1, 0], dtype=np.int32)
    return Dataset(feats, labels, 2)


class TestTraining:
    def test_single_step_matches_manual(self):
        ds = four_point_dataset()
        cfg = TrainConfig(
            epochs=1, base_lr=0.05, weight_decay=1e-4, minibatch_size=64,
            init_seed=3, shuffle_seed=4,
        )
        head = train_head(ds, np.arange(4), cfg)

        rng = np.random.default_rng(3)
        w0 = rng.normal(0.0, 0.01, (2, 2))
        b0 = np.zeros(2)
        perm = np.random.default_rng(4).permutation(4)
        xb = ds.features[perm].astype(np.float64)
        yb = ds.labels[perm]
        w1, b1 = manual_epoch(w0, b0, xb, yb, 2, 0.05, 1e-4)

        np.testing.assert_allclose(head.weights, w1, rtol=1e-10)
        np.testing.assert_allclose(head.biases, b1, rtol=1e-10)

    def test_incomplete_final_minibatch_is_trained(self):
        # Five instances with minibatch 3: two update steps per epoch,
        # the second covering only two rows.
        feats = np.array(
            [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.7, 0.7]],
            dtype=np.float32,
        )
        ds = Dataset(feats, np.array([0, 1, 1, 0, 1], dtype=np.int32), 2)
        cfg = TrainConfig(
            epochs=1, base_lr=0.1, weight_decay=0.0, minibatch_size=3,
            init_seed=7, shuffle_seed=8,
        )
        head = train_head(ds, np.arange(5), cfg)

        rng = np.random.default_rng(7)
        w = rng.normal(0.0, 0.01, (2, 2))
        b = np.zeros(2)
        perm = np.random.default_rng(8).permutation(5)
        x64 = ds.features.astype(np.float64)
        for lo in (0, 3):
            take = perm[lo : lo + 3]
            w, b = manual_epoch(w, b, x64[take], ds.labels[take], 2, 0.1, 0.0)
        np.testing.assert_allclose(head.weights, w, rtol=1e-10)
        np.testing.assert_allclose(head.biases, b, rtol=1e-10)

    def test_two_epochs_use_cosine_schedule(self):
        ds = four_point_dataset()
        cfg = TrainConfig(
            epochs=2, base_lr=0.05, weight_decay=1e-4, minibatch_size=64,
            init_seed=3, shuffle_seed=4,
        )
        head = train_head(ds, np.arange(4), cfg)

        rng = np.random.default_rng(3)
        w = rng.normal(0.0, 0.01, (2, 2))
        b = np.zeros(2)
        shuffle = np.random.default_rng(4)
        x64 = ds.features.astype(np.float64)
        for epoch in range(2):
            lr = 0.05 * 0.5 * (1.0 + np.cos(np.pi * epoch / 2))
            perm = shuffle.permutation(4)
            w, b = manual_epoch(w, b, x64[perm], ds.labels[perm], 2, lr, 1e-4)
        np.testing.assert_allclose(head.weights, w, rtol=1e-10)
        np.testing.assert_allclose(head.biases, b, rtol=1e-10)

    def test_determinism(self, blobs_easy):
        cfg = TrainConfig(epochs=20, init_seed=1, shuffle_seed=2)
        idx = np.arange(30)
        a = train_head(blobs_easy, idx, cfg)
        b = train_head(blobs_easy, idx, cfg)
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.biases, b.biases)

    def test_seeds_matter(self, blobs_easy):
        idx = np.arange(70)
        base = TrainConfig(epochs=5, minibatch_size=16, init_seed=1, shuffle_seed=2)
        other_init = TrainConfig(epochs=5, minibatch_size=16, init_seed=9, shuffle_seed=2)
        other_shuf = TrainConfig(epochs=5, minibatch_size=16, init_seed=1, shuffle_seed=9)
        a = train_head(blobs_easy, idx, base)
        b = train_head(blobs_easy, idx, other_init)
        c = train_head(blobs_easy, idx, other_shuf)
        assert not np.array_equal(a.weights, b.weights)
        assert not np.array_equal(a.weights, c.weights)

    def test_label_table_override(self, blobs_easy):
        idx = np.arange(25)
        cfg = TrainConfig(epochs=10, init_seed=1, shuffle_seed=2)
        truth = train_head(blobs_easy, idx, cfg)

        # Changing labels outside the trained rows must not matter.
        alt = blobs_easy.labels.copy()
        alt[40:] = (alt[40:] + 1) % blobs_easy.num_classes
        same = train_head(blobs_easy, idx, cfg, labels=alt)
        np.testing.assert_array_equal(truth.weights, same.weights)

        # Changing a trained row must.
        alt2 = blobs_easy.labels.copy()
        alt2[idx[0]] = (alt2[idx[0]] + 1) % blobs_easy.num_classes
        diff = train_head(blobs_easy, idx, cfg, labels=alt2)
        assert not np.array_equal(truth.weights, diff.weights)

    def test_learns_separable_data(self, blobs_easy):
        cfg = TrainConfig(epochs=120, init_seed=0, shuffle_seed=0)
        idx = np.arange(blobs_easy.n)
        head = train_head(blobs_easy, idx, cfg)
        err = evaluate(head, blobs_easy, idx, "zero_one")
        assert err <= 0.02

    def test_loss_trace(self, blobs_easy):
        trace = []
        cfg = TrainConfig(epochs=40, init_seed=1, shuffle_seed=2)
        idx = np.arange(60)
        head = train_head(blobs_easy, idx, cfg, loss_trace=trace)
        assert len(trace) == 40
        assert all(np.isfinite(v) for v in trace)
        assert trace[-1] < trace[0]
        # Final entry is the regularized objective at the final parameters.
        ce = evaluate(head, blobs_easy, idx, "cross_entropy")
        penalty = 0.5 * cfg.weight_decay * float(np.sum(head.weights**2))
        assert trace[-1] == pytest.approx(ce + penalty, rel=1e-9)

    def test_counter_tracks_instances(self, blobs_easy):
        counter = RetrainCounter()
        cfg = TrainConfig(epochs=2)
        train_head(blobs_easy, np.arange(12), cfg, counter=counter)
        train_head(blobs_easy, np.arange(30), cfg, counter=counter)
        assert counter.retrains == 2
        assert counter.instances == 42

    def test_empty_index_set_rejected(self, blobs_easy):
        with pytest.raises(ValidationError):
            train_head(blobs_easy, np.array([], dtype=np.int64), TrainConfig(epochs=1))

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(epochs=0)
        with pytest.raises(ValidationError):
            TrainConfig(base_lr=0.0)
        with pytest.raises(ValidationError):
            TrainConfig(minibatch_size=0)
        with pytest.raises(ValidationError):
            TrainConfig(weight_decay=-1e-4)


class TestPredictAndLosses:
    def test_uniform_probabilities_from_zero_head(self, blobs_easy):
        head = zero_head(blobs_easy)
        probs = predict_proba(head, blobs_easy, np.arange(10))
        assert probs.shape == (10, 3)
        np.testing.assert_allclose(probs, 1.0 / 3.0)

    def test_rows_sum_to_one(self, blobs_easy):
        cfg = TrainConfig(epochs=5)
        head = train_head(blobs_easy, np.arange(40), cfg)
        probs = predict_proba(head, blobs_easy, np.arange(50))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-12)

    def test_cross_entropy_uniform(self, blobs_easy):
        head = zero_head(blobs_easy)
        val = evaluate(head, blobs_easy, np.arange(30), "cross_entropy")
        assert val == pytest.approx(np.log(3.0), rel=1e-12)

    def test_brier_uniform(self, blobs_easy):
        # Uniform prediction over K classes scores (K-1)/K on the squared
        # probability scale regardless of the true label.
        head = zero_head(blobs_easy)
        val = evaluate(head, blobs_easy, np.arange(30), "brier")
        assert val == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_zero_one_tie_breaks_to_lowest_class(self, blobs_easy):
        head = zero_head(blobs_easy)
        idx0 = np.where(blobs_easy.labels == 0)[0][:5]
        idx2 = np.where(blobs_easy.labels == 2)[0][:5]
        assert evaluate(head, blobs_easy, idx0, "zero_one") == 0.0
        assert evaluate(head, blobs_easy, idx2, "zero_one") == 1.0

    def test_cross_entropy_clamp(self):
        feats = np.array([[1.0], [-1.0]], dtype=np.float32)
        ds = Dataset(feats, np.array([0, 1], dtype=np.int32), 2)
        head = LinearHead(np.array([[-4000.0], [4000.0]]), np.zeros(2))
        val = evaluate(head, ds, np.array([0]), "cross_entropy")
        assert val == pytest.approx(-np.log(PROB_CLAMP), rel=1e-12)

    def test_evaluate_label_override(self, blobs_easy):
        head = zero_head(blobs_easy)  # predicts class 0 everywhere
        idx = np.arange(30)
        alt = np.zeros(blobs_easy.n, dtype=np.int32)
        assert evaluate(head, blobs_easy, idx, "zero_one", labels=alt) == 0.0

    def test_loss_names(self):
        assert set(LOSSES) == {"zero_one", "cross_entropy", "brier"}
        for name in LOSSES:
            validate_loss(name)
        with pytest.raises(ValidationError):
            validate_loss("hinge")


class TestGradCheck:
    def test_analytic_matches_numeric(self, blobs_mixed):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            head = LinearHead(
                rng.normal(0.0, 0.5, (blobs_mixed.num_classes, blobs_mixed.dim)),
                rng.normal(0.0, 0.5, blobs_mixed.num_classes),
            )
            idx = rng.choice(blobs_mixed.n, size=20, replace=False)
            err = grad_check(head, blobs_mixed, idx)
            assert err < 1e-4

    def test_error_is_scale_free(self, blobs_easy):
        head = zero_head(blobs_easy)
        err = grad_check(head, blobs_easy, np.arange(15))
        assert np.isfinite(err)
        assert 0.0 <= err < 1e-4
