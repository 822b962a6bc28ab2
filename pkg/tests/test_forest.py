"""Tests for the from-scratch random-forest regression baseline."""

import numpy as np
import pytest

from bucktwin.errors import ValidationError
from bucktwin.forest import (
    RfConfig,
    load_forest,
    rf_predict,
    rf_train,
    save_forest,
)


def toy_data(n=400, seed=0, n_features=4, n_outputs=2):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, n_features))
    y = np.column_stack(
        [np.sin(2.0 * x[:, 0]) + 0.5 * x[:, 1]] * n_outputs
    ) + 0.01 * rng.standard_normal((n, n_outputs))
    return x, y


class TestConfig:
    def test_defaults(self):
        cfg = RfConfig()
        assert (cfg.n_trees, cfg.max_depth, cfg.min_samples_leaf) == (100, 12, 2)
        assert cfg.bootstrap is True and cfg.max_features is None

    def test_features_per_split_rule(self):
        assert RfConfig().features_per_split(6) == 2
        assert RfConfig().features_per_split(2) == 1
        assert RfConfig(max_features=4).features_per_split(6) == 4
        assert RfConfig(max_features=10).features_per_split(6) == 6

    @pytest.mark.parametrize(
        "bad",
        [
            {"n_trees": 0},
            {"max_depth": -1},
            {"min_samples_leaf": 0},
            {"max_features": 0},
        ],
    )
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ValidationError):
            RfConfig(**bad).validate()


class TestStumpDegenerateCase:
    def test_single_depth_zero_tree_predicts_training_mean(self):
        x, y = toy_data(n=50)
        model = rf_train(x, y, RfConfig(n_trees=1, max_depth=0, bootstrap=False))
        pred = rf_predict(model, x)
        assert np.allclose(pred, y.mean(axis=0))
        far = rf_predict(model, np.full((3, x.shape[1]), 9.9))
        assert np.allclose(far, y.mean(axis=0))


class TestTraining:
    def test_seeded_training_is_deterministic(self):
        x, y = toy_data()
        cfg = RfConfig(n_trees=5, seed=3)
        a = rf_train(x, y, cfg)
        b = rf_train(x, y, cfg)
        probe = np.random.default_rng(1).uniform(-1, 1, size=(20, x.shape[1]))
        assert np.array_equal(rf_predict(a, probe), rf_predict(b, probe))
        c = rf_train(x, y, RfConfig(n_trees=5, seed=4))
        assert not np.array_equal(rf_predict(a, probe), rf_predict(c, probe))

    def test_no_bootstrap_full_features_trees_are_identical(self):
        x, y = toy_data(n=120)
        cfg = RfConfig(n_trees=3, bootstrap=False, max_features=x.shape[1])
        model = rf_train(x, y, cfg)
        probe = np.random.default_rng(2).uniform(-1, 1, size=(30, x.shape[1]))
        per_tree = [
            rf_predict(
                rf_train(x, y, RfConfig(n_trees=1, bootstrap=False,
                                        max_features=x.shape[1], seed=s)),
                probe,
            )
            for s in (0, 7)
        ]
        assert np.array_equal(per_tree[0], per_tree[1])
        assert np.allclose(rf_predict(model, probe), per_tree[0])

    def test_bootstrap_trees_differ(self):
        x, y = toy_data(n=120)
        probe = np.random.default_rng(2).uniform(-1, 1, size=(30, x.shape[1]))
        one = rf_predict(rf_train(x, y, RfConfig(n_trees=1, seed=0)), probe)
        two = rf_predict(rf_train(x, y, RfConfig(n_trees=1, seed=1)), probe)
        assert not np.array_equal(one, two)

    def test_fits_smooth_function_well(self):
        x, y = toy_data(n=2000, seed=5)
        x_test, y_test = toy_data(n=500, seed=6)
        model = rf_train(x, y, RfConfig(n_trees=30))
        resid = rf_predict(model, x_test) - y_test
        r2 = 1.0 - (resid**2).mean() / y_test.var()
        assert r2 > 0.95

    def test_deeper_trees_fit_training_data_better(self):
        x, y = toy_data(n=500, seed=7)
        shallow = rf_train(x, y, RfConfig(n_trees=10, max_depth=2))
        deep = rf_train(x, y, RfConfig(n_trees=10, max_depth=12))
        mse = lambda m: ((rf_predict(m, x) - y) ** 2).mean()
        assert mse(deep) < mse(shallow)

    def test_min_samples_leaf_respected(self):
        x, y = toy_data(n=40, seed=8)
        model = rf_train(
            x, y, RfConfig(n_trees=4, min_samples_leaf=10, bootstrap=False)
        )
        for tree in model.trees:
            leaf_counts = _leaf_sample_counts(tree, x)
            assert all(c >= 10 for c in leaf_counts if c > 0)

    def test_rejects_bad_shapes_and_values(self):
        x, y = toy_data(n=20)
        with pytest.raises(ValidationError):
            rf_train(x[:, 0], y)
        with pytest.raises(ValidationError):
            rf_train(x, y[:10])
        with pytest.raises(ValidationError):
            rf_train(np.empty((0, 3)), np.empty((0, 2)))
        bad = x.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            rf_train(bad, y)


def _leaf_sample_counts(tree, x):
    node = np.zeros(len(x), dtype=np.int64)
    active = tree.feature[node] >= 0
    while np.any(active):
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = x[rows, tree.feature[cur]] <= tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
        active = tree.feature[node] >= 0
    leaves = np.flatnonzero(tree.feature < 0)
    return [int((node == leaf).sum()) for leaf in leaves]


class TestPredict:
    def test_single_row_returns_vector(self):
        x, y = toy_data(n=60)
        model = rf_train(x, y, RfConfig(n_trees=3))
        out = rf_predict(model, x[0])
        assert out.shape == (y.shape[1],)
        batch = rf_predict(model, x[:7])
        assert batch.shape == (7, y.shape[1])
        assert np.allclose(batch[0], out)

    def test_prediction_is_mean_over_trees(self):
        x, y = toy_data(n=150, seed=9)
        cfg = RfConfig(n_trees=4, seed=11)
        model = rf_train(x, y, cfg)
        probe = x[:5]
        y_std_preds = []
        for tree in model.trees:
            node = np.zeros(len(probe), dtype=np.int64)
            active = tree.feature[node] >= 0
            while np.any(active):
                rows = np.flatnonzero(active)
                cur = node[rows]
                go_left = probe[rows, tree.feature[cur]] <= tree.threshold[cur]
                node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
                active = tree.feature[node] >= 0
            y_std_preds.append(tree.value[node])
        manual = np.mean(y_std_preds, axis=0) * model.y_std + model.y_mean
        assert np.allclose(rf_predict(model, probe), manual)

    def test_rejects_wrong_width_and_nonfinite(self):
        x, y = toy_data(n=30)
        model = rf_train(x, y, RfConfig(n_trees=2))
        with pytest.raises(ValidationError):
            rf_predict(model, x[:, :2])
        bad = x[:3].copy()
        bad[1, 1] = np.inf
        with pytest.raises(ValidationError):
            rf_predict(model, bad)


class TestCheckpoint:
    def test_save_load_round_trip(self, tmp_path):
        x, y = toy_data(80)
        model = rf_train(x, y, RfConfig(n_trees=5, max_depth=4, seed=3))
        path = str(tmp_path / "forest.npz")
        save_forest(model, path)
        loaded = load_forest(path)
        assert loaded.config == model.config
        assert loaded.n_features == model.n_features
        assert np.array_equal(rf_predict(loaded, x), rf_predict(model, x))

    def test_rejects_unknown_version(self, tmp_path):
        x, y = toy_data(40)
        model = rf_train(x, y, RfConfig(n_trees=2, max_depth=3))
        path = str(tmp_path / "forest.npz")
        save_forest(model, path)
        with np.load(path) as data:
            payload = {k: data[k] for k in data.files}
        payload["version"] = np.array(99)
        np.savez(path, **payload)
        with pytest.raises(ValidationError, match="version"):
            load_forest(path)
