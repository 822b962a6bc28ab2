"""Tests for the from-scratch MLP regressor."""

import math

import numpy as np
import pytest

from bucktwin.errors import TrainingError, ValidationError
from bucktwin.mlp import (
    MlpModel,
    TrainConfig,
    _loss_and_grads,
    _standardization,
    evaluate,
    forward,
    init_model,
    load_model,
    predict,
    regression_metrics,
    save_model,
    train_arrays,
)


class TestInit:
    def test_default_parameter_count(self):
        assert init_model().parameter_count() == 17349

    def test_seeded_init_is_bit_identical(self):
        a, b = init_model(seed=9), init_model(seed=9)
        assert all(np.array_equal(w1, w2) for w1, w2 in zip(a.weights, b.weights))
        c = init_model(seed=10)
        assert not np.array_equal(a.weights[0], c.weights[0])

    def test_weight_shapes_chain(self):
        model = init_model()
        shapes = [w.shape for w in model.weights]
        assert shapes == [(6, 64), (64, 128), (128, 64), (64, 5)]
        assert all(b.shape == (n,) for b, n in zip(model.biases, (64, 128, 64, 5)))

    def test_zero_init_forward_returns_output_bias(self):
        model = init_model(zero_init=True)
        model.biases[-1][:] = [1.0, -2.0, 3.0, 0.5, 0.0]
        out = forward(model, np.array([4.0, -1.0, 2.0, 0.0, 9.0, -3.0]))
        assert np.array_equal(out, model.biases[-1])

    def test_rejects_bad_architecture(self):
        with pytest.raises(ValidationError):
            init_model((6,))
        with pytest.raises(ValidationError):
            init_model((6, 0, 5))
        with pytest.raises(ValidationError):
            init_model((6, 8, 5), dropout_rates=(0.2, 0.2))
        with pytest.raises(ValidationError):
            init_model((6, 8, 5), dropout_rates=(1.0,))


class TestForward:
    def test_single_unit_relu_chain(self):
        model = init_model((1, 1, 1), zero_init=True)
        model.weights[0][:] = 1.0
        model.weights[1][:] = 1.0
        assert forward(model, np.array([-3.0])) == pytest.approx(0.0)
        assert forward(model, np.array([2.0])) == pytest.approx(2.0)

    def test_inference_is_deterministic_despite_dropout_rates(self):
        model = init_model(seed=2)
        x = np.linspace(-1.0, 1.0, 6)
        assert np.array_equal(forward(model, x), forward(model, x))

    def test_batch_and_single_agree(self):
        model = init_model(seed=2)
        x = np.linspace(-1.0, 1.0, 6)
        batch = forward(model, np.stack([x, 2 * x]))
        assert np.allclose(batch[0], forward(model, x))

    def test_rejects_nonfinite_and_wrong_width(self):
        model = init_model()
        with pytest.raises(ValidationError):
            forward(model, np.array([1.0, 2.0, np.nan, 0.0, 0.0, 0.0]))
        with pytest.raises(ValidationError):
            forward(model, np.zeros(5))

    def test_dropout_mean_matches_inference_when_feeding_linear_layer(self):
        # With dropout on the last hidden layer the output is linear in the
        # mask, so the masked-pass expectation equals the plain pass; 10,000
        # passes land within 2% per output.
        model = init_model((6, 32, 5), seed=4, dropout_rates=(0.2,))
        x = np.random.default_rng(0).uniform(-1.0, 1.0, size=6)
        ref = forward(model, x)
        masked = forward(
            model,
            np.tile(x, (10000, 1)),
            training=True,
            dropout_rng=np.random.default_rng(42),
        )
        gap = np.abs(masked.mean(axis=0) - ref) / np.abs(ref)
        assert gap.max() < 0.02

    def test_training_pass_without_rng_is_rejected(self):
        model = init_model((6, 32, 5), seed=4, dropout_rates=(0.2,))
        with pytest.raises(ValidationError):
            forward(model, np.zeros(6), training=True)


class TestGradients:
    def test_backprop_matches_central_differences(self):
        model = init_model((6, 8, 8, 5), seed=17)
        rng = np.random.default_rng(3)
        x = rng.uniform(-1.0, 1.0, size=(10, 6))
        y = rng.uniform(-1.0, 1.0, size=(10, 5))
        _, grad_w, grad_b = _loss_and_grads(model, x, y)

        eps = 1e-5
        worst = 0.0
        for params, grads in ((model.weights, grad_w), (model.biases, grad_b)):
            for arr, grad in zip(params, grads):
                flat, gflat = arr.ravel(), grad.ravel()
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + eps
                    up, _, _ = _loss_and_grads(model, x, y)
                    flat[i] = orig - eps
                    down, _, _ = _loss_and_grads(model, x, y)
                    flat[i] = orig
                    numeric = (up - down) / (2.0 * eps)
                    rel = abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-6)
                    worst = max(worst, rel)
        assert worst < 1e-4


def linear_problem(n=64, seed=7):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 3))
    return x, x @ rng.normal(size=(3, 2))


class TestTraining:
    def test_memorizes_a_single_sample(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1.0, 1.0, size=(1, 6))
        y = rng.uniform(-1.0, 1.0, size=(1, 5))
        model = init_model((6, 32, 5), seed=1)
        config = TrainConfig(
            batch_size=1, max_epochs=500, validation_fraction=0.0, normalize=False
        )
        trained, _ = train_arrays(model, x, y, config=config)
        assert np.mean((forward(trained, x) - y) ** 2) < 1e-6

    def test_zero_learning_rate_changes_nothing(self):
        x, y = linear_problem()
        model = init_model((3, 8, 2), seed=0)
        config = TrainConfig(
            learning_rate=0.0, batch_size=64, max_epochs=20, validation_fraction=0.0
        )
        trained, history = train_arrays(model, x, y, config=config)
        assert all(np.array_equal(a, b) for a, b in zip(trained.weights, model.weights))
        # row order inside the batch varies per epoch, so the loss is flat
        # only up to summation rounding
        spread = max(history.train_loss) - min(history.train_loss)
        assert spread <= 1e-12 * history.train_loss[0]

    def test_full_batch_descent_is_monotone_on_linear_target(self):
        x, y = linear_problem()
        model = init_model((3, 8, 2), seed=11)
        config = TrainConfig(batch_size=64, max_epochs=200, validation_fraction=0.0, seed=13)
        _, history = train_arrays(model, x, y, config=config)
        increases = np.diff(history.train_loss)
        assert np.all(increases <= 1e-12)

    def test_training_is_bit_reproducible(self):
        x, y = linear_problem()
        model = init_model((3, 8, 2), seed=4)
        config = TrainConfig(batch_size=16, max_epochs=10, seed=21)
        a, hist_a = train_arrays(model, x, y, config=config)
        b, hist_b = train_arrays(model, x, y, config=config)
        assert hist_a == hist_b
        assert all(np.array_equal(w1, w2) for w1, w2 in zip(a.weights, b.weights))

    def test_returns_best_validation_snapshot(self):
        x, y = linear_problem(n=200)
        model = init_model((3, 16, 2), seed=6)
        config = TrainConfig(batch_size=16, max_epochs=30, seed=3)
        trained, history = train_arrays(model, x, y, config=config)
        assert history.val_loss[history.best_epoch] == min(history.val_loss)
        assert len(history.train_loss) == len(history.val_loss) == 30

    def test_divergence_raises_training_error_with_epoch(self):
        x, y = linear_problem()
        model = init_model((3, 8, 2), seed=0)
        config = TrainConfig(
            learning_rate=1e154, batch_size=8, max_epochs=5, validation_fraction=0.0
        )
        with pytest.raises(TrainingError) as excinfo:
            train_arrays(model, x, y, config=config)
        assert excinfo.value.epoch == 0

    def test_input_model_is_not_mutated(self):
        x, y = linear_problem()
        model = init_model((3, 8, 2), seed=2)
        before = [w.copy() for w in model.weights]
        train_arrays(model, x, y, config=TrainConfig(max_epochs=3))
        assert all(np.array_equal(w, b) for w, b in zip(model.weights, before))

    def test_standardization_round_trip_and_zero_variance_guard(self):
        values = np.array([[1.0, 5.0], [3.0, 5.0], [7.0, 5.0]])
        mean, std = _standardization(values)
        assert std[1] == 1.0  # zero-variance column guarded
        restored = ((values - mean) / std) * std + mean
        assert np.all(np.abs(restored - values) < 1e-12)

    def test_rejects_mismatched_rows_and_bad_config(self):
        x, y = linear_problem()
        model = init_model((3, 8, 2))
        with pytest.raises(ValidationError):
            train_arrays(model, x, y[:-1])
        with pytest.raises(ValidationError):
            TrainConfig(batch_size=0).validate()
        with pytest.raises(ValidationError):
            TrainConfig(validation_fraction=1.0).validate()


class TestEvaluate:
    def test_perfect_predictions(self):
        y = np.random.default_rng(0).uniform(size=(20, 5))
        metrics = regression_metrics(y, y.copy())
        assert metrics.mse == (0.0,) * 5
        assert metrics.r2 == (1.0,) * 5
        assert metrics.overall_mse == 0.0

    def test_constant_predictor_at_mean_scores_zero_r2(self):
        y = np.random.default_rng(1).uniform(size=(20, 3))
        pred = np.tile(y.mean(axis=0), (20, 1))
        metrics = regression_metrics(y, pred)
        assert metrics.r2 == pytest.approx((0.0,) * 3, abs=1e-12)

    def test_zero_variance_target_flags_r2_as_nan(self):
        y = np.ones((10, 2))
        pred = np.zeros((10, 2))
        metrics = regression_metrics(y, pred)
        assert all(math.isnan(r) for r in metrics.r2)
        report = metrics.to_dict()
        assert report["y0"]["r2"] is None
        assert report["y0"]["mse"] == pytest.approx(1.0)

    def test_evaluate_names_converter_outputs(self):
        model = init_model(seed=0)
        x = np.random.default_rng(2).uniform(size=(4, 6))
        y = np.random.default_rng(3).uniform(size=(4, 5))
        metrics = evaluate(model, x, y)
        assert metrics.output_names == ("L", "C", "r_L", "r_C", "r_ds_on")

    def test_rejects_empty_or_mismatched(self):
        with pytest.raises(ValidationError):
            regression_metrics(np.zeros((0, 2)), np.zeros((0, 2)))
        with pytest.raises(ValidationError):
            regression_metrics(np.zeros((3, 2)), np.zeros((3, 3)))


class TestCheckpoint:
    def test_round_trip_preserves_predictions(self, tmp_path):
        x, y = linear_problem()
        model = init_model((3, 8, 2), seed=1)
        trained, _ = train_arrays(model, x, y, config=TrainConfig(max_epochs=5))
        path = str(tmp_path / "model.npz")
        save_model(trained, path)
        loaded = load_model(path)
        assert loaded.layer_sizes == trained.layer_sizes
        assert loaded.dropout_rates == trained.dropout_rates
        probe = np.random.default_rng(8).uniform(size=(7, 3))
        assert np.array_equal(predict(loaded, probe), predict(trained, probe))

    def test_rejects_unknown_version(self, tmp_path):
        model = init_model((3, 8, 2))
        path = str(tmp_path / "model.npz")
        save_model(model, path)
        with np.load(path) as data:
            payload = {k: data[k] for k in data.files}
        payload["version"] = np.array(999)
        np.savez(path, **payload)
        with pytest.raises(ValidationError):
            load_model(path)
