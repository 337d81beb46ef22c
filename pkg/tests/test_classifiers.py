import math

import numpy as np
import pytest

from gatefuse.classifiers import (
    FAMILIES,
    ForestConfig,
    GnbConfig,
    LogRegConfig,
    SvmConfig,
    _tree_leaf_codes,
    load_model,
    logreg_gradient,
    logreg_loss,
    predict,
    predict_scores,
    save_model,
    train,
)
from gatefuse.errors import DegenerateLabels, DimensionMismatch, NonFiniteInput


def cluster_data(n_classes=4, per_class=30, dim=5, spread=0.3, seed=0):
    rng = np.random.default_rng(seed)
    centers = 6.0 * rng.normal(size=(n_classes, dim))
    X = np.vstack([
        centers[k] + spread * rng.normal(size=(per_class, dim))
        for k in range(n_classes)
    ])
    y = np.repeat([f"c{k}" for k in range(n_classes)], per_class)
    return X, y


def small_cfg(family):
    return {
        "svm": SvmConfig(epochs=15),
        "logreg": LogRegConfig(iterations=60),
        "gnb": GnbConfig(),
        "forest": ForestConfig(n_trees=20),
    }[family]


class TestGaussianNB:
    def test_two_point_hand_example(self):
        model = train("gnb", [[0.0], [1.0]], ["a", "b"])
        assert predict(model, [[0.1]])[0] == "a"
        # log-densities evaluated by hand: probe nearer 0 by far
        scores = predict_scores(model, [[0.1]])[0]
        assert scores[0] > 1.0 - 1e-12

    def test_matches_bayes_rule_oracle(self):
        rng = np.random.default_rng(10)
        for trial in range(20):
            n_classes = int(rng.integers(2, 5))
            dim = int(rng.integers(1, 4))
            X = rng.normal(size=(n_classes * 8, dim))
            y = np.repeat(np.arange(n_classes), 8)
            X[np.arange(len(y)), :] += 2.0 * y[:, None]
            model = train("gnb", X, y)
            probes = rng.normal(size=(5, dim)) + 1.0
            got = predict_scores(model, probes)
            means = model.params["means"]
            variances = model.params["variances"]
            priors = np.exp(model.params["log_priors"][0])
            for i, x in enumerate(probes):
                joint = np.empty(n_classes)
                for k in range(n_classes):
                    density = 1.0
                    for j in range(dim):
                        var = variances[k, j]
                        density *= math.exp(
                            -((x[j] - means[k, j]) ** 2) / (2 * var)
                        ) / math.sqrt(2 * math.pi * var)
                    joint[k] = priors[k] * density
                want = joint / joint.sum()
                np.testing.assert_allclose(got[i], want, atol=1e-12)

    def test_symmetric_midpoint_probability(self):
        X = np.array([[-1.0], [-1.2], [1.0], [1.2]])
        y = ["a", "a", "b", "b"]
        model = train("gnb", X, y)
        scores = predict_scores(model, [[0.0]])
        np.testing.assert_allclose(scores[0], [0.5, 0.5], atol=1e-9)

    def test_constant_feature_survives_var_floor(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
        model = train("gnb", X, ["a", "a", "b", "b"])
        assert np.all(np.isfinite(predict_scores(model, X)))

    def test_training_points_recovered(self):
        X, y = cluster_data(seed=3)
        model = train("gnb", X, y)
        assert np.all(predict(model, X) == y)


class TestLogReg:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        n, d, C = 20, 3, 3
        X = rng.normal(size=(n, d))
        onehot = np.eye(C)[rng.integers(0, C, size=n)]
        l2 = 1e-3
        h = 1e-6
        for _ in range(10):
            W = rng.normal(size=(d, C))
            b = rng.normal(size=C)
            gW, gb = logreg_gradient(W, b, X, onehot, l2)
            numeric = np.empty_like(gW)
            for i in range(d):
                for j in range(C):
                    Wp, Wm = W.copy(), W.copy()
                    Wp[i, j] += h
                    Wm[i, j] -= h
                    numeric[i, j] = (
                        logreg_loss(Wp, b, X, onehot, l2)
                        - logreg_loss(Wm, b, X, onehot, l2)
                    ) / (2 * h)
            denom = np.maximum(np.abs(numeric), 1e-8)
            assert np.max(np.abs(gW - numeric) / denom) < 1e-5
            numeric_b = np.empty_like(gb)
            for j in range(C):
                bp, bm = b.copy(), b.copy()
                bp[j] += h
                bm[j] -= h
                numeric_b[j] = (
                    logreg_loss(W, bp, X, onehot, l2)
                    - logreg_loss(W, bm, X, onehot, l2)
                ) / (2 * h)
            assert np.max(np.abs(gb - numeric_b) / np.maximum(np.abs(numeric_b), 1e-8)) < 1e-5

    def test_loss_non_increasing(self):
        X, y = cluster_data(seed=5)
        model = train("logreg", X, y, LogRegConfig(iterations=80))
        history = model.params["loss_history"][0]
        assert np.all(np.diff(history) <= 1e-12)

    def test_midpoint_tie_breaks_to_first_label(self):
        model = train("logreg", [[-1.0], [1.0]], ["a", "b"])
        assert predict(model, [[0.0]])[0] == "a"
        np.testing.assert_allclose(predict_scores(model, [[0.0]])[0], [0.5, 0.5],
                                   atol=1e-9)

    def test_scores_are_softmax_of_logits(self):
        X, y = cluster_data(seed=6)
        model = train("logreg", X, y, LogRegConfig(iterations=30))
        probe = X[:7]
        mean = model.params["feature_mean"][0]
        scale = model.params["feature_scale"][0]
        logits = ((probe - mean) / scale) @ model.params["weights"] + \
            model.params["biases"][0]
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        want = shifted / shifted.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(predict_scores(model, probe), want, atol=1e-12)

    def test_probability_rows_sum_to_one(self):
        X, y = cluster_data(seed=7)
        model = train("logreg", X, y, LogRegConfig(iterations=30))
        np.testing.assert_allclose(predict_scores(model, X).sum(axis=1), 1.0,
                                   atol=1e-9)


class TestLinearSvm:
    def test_halfspace_geometry(self):
        rng = np.random.default_rng(8)
        X = np.vstack([
            rng.normal(size=(40, 2)) + [4.0, 0.0],
            rng.normal(size=(40, 2)) + [-4.0, 0.0],
        ])
        y = ["right"] * 40 + ["left"] * 40
        model = train("svm", X, y)
        assert predict(model, [[9.0, 0.5]])[0] == "right"
        assert predict(model, [[-9.0, -0.5]])[0] == "left"

    def test_scores_are_raw_margins(self):
        X, y = cluster_data(seed=9)
        model = train("svm", X, y)
        scores = predict_scores(model, X[:5])
        # margins are unbounded, not normalized probabilities
        assert not np.allclose(scores.sum(axis=1), 1.0)


class TestRandomForest:
    def test_separable_clusters_perfect_training_accuracy(self):
        X, y = cluster_data(n_classes=4, per_class=25, seed=11)
        model = train("forest", X, y, ForestConfig(n_trees=50), seed=1)
        assert np.mean(predict(model, X) == y) == 1.0

    def test_vote_fractions_sum_to_one(self):
        X, y = cluster_data(seed=12)
        model = train("forest", X, y, ForestConfig(n_trees=10), seed=2)
        np.testing.assert_allclose(predict_scores(model, X).sum(axis=1), 1.0,
                                   atol=1e-12)

    def test_single_tree_forest_equals_its_tree(self):
        X, y = cluster_data(seed=13)
        model = train(
            "forest", X, y, ForestConfig(n_trees=1, max_features="all"), seed=3
        )
        tree = model.params["tree_0000"]
        codes = _tree_leaf_codes(tree, X)
        want = np.asarray(model.label_vocab)[codes]
        assert np.all(predict(model, X) == want)


class TestSharedContract:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_deterministic(self, family):
        X, y = cluster_data(seed=20)
        probe = X[::5] + 0.05
        a = train(family, X, y, small_cfg(family), seed=5)
        b = train(family, X, y, small_cfg(family), seed=5)
        assert np.all(predict(a, probe) == predict(b, probe))
        np.testing.assert_array_equal(
            predict_scores(a, probe), predict_scores(b, probe)
        )

    @pytest.mark.parametrize("family", FAMILIES)
    def test_argmax_of_scores_is_predict(self, family):
        X, y = cluster_data(seed=21)
        model = train(family, X, y, small_cfg(family), seed=6)
        scores = predict_scores(model, X)
        want = np.asarray(model.label_vocab)[np.argmax(scores, axis=1)]
        assert np.all(predict(model, X) == want)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_labels_stay_in_vocab(self, family):
        X, y = cluster_data(seed=22)
        model = train(family, X, y, small_cfg(family), seed=7)
        rng = np.random.default_rng(0)
        out = predict(model, rng.normal(size=(10, X.shape[1])))
        assert set(out.tolist()) <= set(model.label_vocab)

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabels):
            train("svm", np.ones((5, 2)), ["a"] * 5)

    def test_nan_rejected(self):
        X = np.ones((4, 2))
        X[1, 1] = np.nan
        with pytest.raises(NonFiniteInput):
            train("gnb", X, ["a", "a", "b", "b"])

    def test_width_mismatch(self):
        X, y = cluster_data(seed=23)
        model = train("gnb", X, y)
        with pytest.raises(DimensionMismatch):
            predict(model, np.ones((2, X.shape[1] + 1)))

    def test_fit_time_recorded(self):
        X, y = cluster_data(seed=24)
        model = train("svm", X, y, SvmConfig(epochs=2))
        assert model.train_meta["fit_seconds"] > 0.0


class TestSerialization:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_round_trip_predictions_bit_identical(self, family, tmp_path):
        X, y = cluster_data(seed=30)
        model = train(family, X, y, small_cfg(family), seed=9)
        probe = X + 0.01
        before_scores = predict_scores(model, probe)
        save_model(model, tmp_path / "model")
        back = load_model(tmp_path / "model")
        assert back.family == model.family
        assert back.label_vocab == model.label_vocab
        np.testing.assert_array_equal(predict_scores(back, probe), before_scores)
        assert np.all(predict(back, probe) == predict(model, probe))

    def test_integer_labels_round_trip(self, tmp_path):
        X, _ = cluster_data(seed=31)
        y = np.repeat([3, 1, 4, 1], 30)[: len(X)]
        y[:30] = 7  # ensure >= 2 classes with int labels
        model = train("gnb", X, y)
        save_model(model, tmp_path / "model")
        back = load_model(tmp_path / "model")
        assert back.label_vocab == model.label_vocab
        assert all(isinstance(v, int) for v in back.label_vocab)
