"""From-scratch multilayer perceptron for component-health regression.

Architecture: 6 -> 64 -> 128 -> 64 -> 5, ReLU on the hidden layers, linear
output, inverted dropout (rates 0.2 / 0.2 / 0.0) on the hidden activations
during training only. Trained with mini-batch Adam on mean-squared error.

Feature and target standardization (zero mean, unit variance, statistics
from the training rows only) is stored inside the model, so `forward` and
`predict` always consume and emit original physical units; training and the
recorded loss history run in standardized space. Training returns the
parameter snapshot from the epoch with the lowest validation loss.

Everything is plain NumPy; a fixed seed makes initialization, shuffling and
dropout masks bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TrainingError, ValidationError

DEFAULT_LAYER_SIZES = (6, 64, 128, 64, 5)
DEFAULT_DROPOUT = (0.2, 0.2, 0.0)


@dataclass
class MlpModel:
    """Weights, biases, dropout rates and standardization statistics."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]       # weights[k]: (layer_sizes[k], layer_sizes[k+1])
    biases: list[np.ndarray]
    dropout_rates: tuple[float, ...]
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    y_mean: np.ndarray = None
    y_std: np.ndarray = None

    def __post_init__(self):
        n_in, n_out = self.layer_sizes[0], self.layer_sizes[-1]
        if self.x_mean is None:
            self.x_mean = np.zeros(n_in)
        if self.x_std is None:
            self.x_std = np.ones(n_in)
        if self.y_mean is None:
            self.y_mean = np.zeros(n_out)
        if self.y_std is None:
            self.y_std = np.ones(n_out)

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            dropout_rates=self.dropout_rates,
            x_mean=self.x_mean.copy(),
            x_std=self.x_std.copy(),
            y_mean=self.y_mean.copy(),
            y_std=self.y_std.copy(),
        )

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


INIT_SCALE = 0.1


def init_model(
    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES,
    seed: int = 0,
    dropout_rates: tuple[float, ...] | None = None,
    zero_init: bool = False,
    init_scale: float = INIT_SCALE,
) -> MlpModel:
    """Scaled fan-in normal initialization: std = init_scale * sqrt(2/fan_in),
    zero biases.

    The small default scale matters when training with dropout and
    best-validation snapshotting: a dropout-trained net at its long-run
    optimum predicts well as a mask *ensemble* but its deterministic
    (inference-time) pass carries an irreducible gap from the ensemble mean.
    Small initial weights keep the net in a near-linear regime for the first
    few epochs, where the deterministic pass and the ensemble mean coincide;
    the validation snapshot captures that window reliably, which full-scale
    He initialization (init_scale=1.0) misses at these layer widths.

    ``zero_init`` is a test hook: all-zero weights make the forward pass
    return the output-layer bias for any input.
    """
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValidationError(f"layer_sizes must chain >= 2 positive sizes, got {layer_sizes}")
    n_hidden = len(layer_sizes) - 2
    if dropout_rates is None:
        dropout_rates = DEFAULT_DROPOUT if layer_sizes == DEFAULT_LAYER_SIZES else (0.0,) * n_hidden
    if len(dropout_rates) != n_hidden:
        raise ValidationError(
            f"need one dropout rate per hidden layer ({n_hidden}), got {len(dropout_rates)}"
        )
    if any(not 0.0 <= r < 1.0 for r in dropout_rates):
        raise ValidationError(f"dropout rates must lie in [0, 1), got {dropout_rates}")
    if not init_scale > 0.0:
        raise ValidationError(f"init_scale must be positive, got {init_scale}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        if zero_init:
            w = np.zeros((n_in, n_out))
        else:
            w = rng.normal(0.0, init_scale * math.sqrt(2.0 / n_in), size=(n_in, n_out))
        weights.append(w)
        biases.append(np.zeros(n_out))
    return MlpModel(tuple(layer_sizes), weights, biases, tuple(dropout_rates))


def _as_batch(x: np.ndarray, width: int, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValidationError(f"{name} must have {width} columns, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr, single


def _forward_standardized(
    model: MlpModel,
    x_std_space: np.ndarray,
    training: bool,
    dropout_rng: np.random.Generator | None,
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """Core pass in standardized space; returns (output, activations, pre-acts, masks).

    ``activations[k]`` is the (post-mask) input to layer k, so the caches
    line up with what backprop needs.
    """
    a = x_std_space
    activations = [a]
    pre_acts: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    n_layers = len(model.weights)
    for k in range(n_layers):
        z = a @ model.weights[k] + model.biases[k]
        pre_acts.append(z)
        if k == n_layers - 1:
            a = z
        else:
            a = np.maximum(z, 0.0)
            rate = model.dropout_rates[k]
            if training and rate > 0.0:
                if dropout_rng is None:
                    raise ValidationError("training forward pass needs a dropout rng")
                mask = (dropout_rng.uniform(size=a.shape) >= rate) / (1.0 - rate)
                a = a * mask
                masks.append(mask)
            else:
                masks.append(np.ones_like(a))
        activations.append(a)
    return a, activations, pre_acts, masks


def forward(
    model: MlpModel,
    x: np.ndarray,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predict in original units; accepts one input vector or a batch."""
    arr, single = _as_batch(x, model.layer_sizes[0], "x")
    x_std = (arr - model.x_mean) / model.x_std
    out_std, _, _, _ = _forward_standardized(model, x_std, training, dropout_rng)
    out = out_std * model.y_std + model.y_mean
    return out[0] if single else out


def predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return forward(model, x, training=False)


def _loss_and_grads(
    model: MlpModel,
    x_std_space: np.ndarray,
    y_std_space: np.ndarray,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE (mean over all elements) and its gradients, standardized space."""
    out, activations, pre_acts, masks = _forward_standardized(
        model, x_std_space, training, dropout_rng
    )
    residual = out - y_std_space
    loss = float(np.mean(residual**2))
    n_layers = len(model.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = 2.0 * residual / residual.size
    for k in range(n_layers - 1, -1, -1):
        grad_w[k] = activations[k].T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k].T) * masks[k - 1] * (pre_acts[k - 1] > 0.0)
    return loss, grad_w, grad_b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 100
    validation_fraction: float = 0.15
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    normalize: bool = True

    def validate(self):
        if not self.learning_rate >= 0:
            raise ValidationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValidationError(
                f"validation_fraction must lie in [0, 1), got {self.validation_fraction}"
            )
        if self.max_epochs < 0:
            # 0 is legal: it yields the untrained model (a metrics baseline).
            raise ValidationError(f"max_epochs must be >= 0, got {self.max_epochs}")


@dataclass(frozen=True)
class TrainHistory:
    train_loss: tuple[float, ...]   # standardized-space MSE per epoch
    val_loss: tuple[float, ...]
    best_epoch: int                 # 0-based index of the returned snapshot


def _standardization(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return mean, std


def train_arrays(
    model: MlpModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    config: TrainConfig = TrainConfig(),
) -> tuple[MlpModel, TrainHistory]:
    """Mini-batch Adam on MSE. Inputs are original units; the model's
    standardization statistics are (re)computed from x_train/y_train when
    config.normalize is set. If no validation arrays are given, the last
    ``validation_fraction`` of a seeded shuffle of the training rows is
    held out; with no validation data at all, snapshot selection falls back
    to training loss. The input model is not mutated."""
    config.validate()
    x_train, _ = _as_batch(x_train, model.layer_sizes[0], "x_train")
    y_train, _ = _as_batch(y_train, model.layer_sizes[-1], "y_train")
    if len(x_train) != len(y_train):
        raise ValidationError(
            f"x_train and y_train row counts differ: {len(x_train)} vs {len(y_train)}"
        )
    rng = np.random.default_rng(config.seed)

    if x_val is None:
        n_hold = int(round(config.validation_fraction * len(x_train)))
        if n_hold > 0:
            order = rng.permutation(len(x_train))
            hold, keep = order[:n_hold], order[n_hold:]
            x_val, y_val = x_train[hold], y_train[hold]
            x_train, y_train = x_train[keep], y_train[keep]
    else:
        x_val, _ = _as_batch(x_val, model.layer_sizes[0], "x_val")
        y_val, _ = _as_batch(y_val, model.layer_sizes[-1], "y_val")
    if len(x_train) == 0:
        raise ValidationError("no training rows left after validation holdout")

    work = model.copy()
    if config.normalize:
        work.x_mean, work.x_std = _standardization(x_train)
        work.y_mean, work.y_std = _standardization(y_train)
    else:
        work.x_mean = np.zeros(model.layer_sizes[0])
        work.x_std = np.ones(model.layer_sizes[0])
        work.y_mean = np.zeros(model.layer_sizes[-1])
        work.y_std = np.ones(model.layer_sizes[-1])

    xt = (x_train - work.x_mean) / work.x_std
    yt = (y_train - work.y_mean) / work.y_std
    has_val = x_val is not None and len(x_val) > 0
    if has_val:
        xv = (x_val - work.x_mean) / work.x_std
        yv = (y_val - work.y_mean) / work.y_std

    m_w = [np.zeros_like(w) for w in work.weights]
    v_w = [np.zeros_like(w) for w in work.weights]
    m_b = [np.zeros_like(b) for b in work.biases]
    v_b = [np.zeros_like(b) for b in work.biases]
    step = 0
    lr, b1, b2, eps = (
        config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps,
    )

    train_hist: list[float] = []
    val_hist: list[float] = []
    best_loss = math.inf
    best_epoch = 0
    best_weights = [w.copy() for w in work.weights]
    best_biases = [b.copy() for b in work.biases]

    n = len(xt)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            # Divergence shows up as overflow before the finite check below
            # raises TrainingError; the interim warnings carry no information.
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grad_w, grad_b = _loss_and_grads(
                    work, xt[batch], yt[batch], training=True, dropout_rng=rng
                )
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            epoch_losses.append(loss)
            step += 1
            corr1 = 1.0 - b1**step
            corr2 = 1.0 - b2**step
            for params, grads, ms, vs in (
                (work.weights, grad_w, m_w, v_w),
                (work.biases, grad_b, m_b, v_b),
            ):
                for k in range(len(params)):
                    ms[k] = b1 * ms[k] + (1 - b1) * grads[k]
                    vs[k] = b2 * vs[k] + (1 - b2) * grads[k] ** 2
                    params[k] -= lr * (ms[k] / corr1) / (np.sqrt(vs[k] / corr2) + eps)
        train_hist.append(float(np.mean(epoch_losses)))
        if has_val:
            score, _, _, _ = _forward_standardized(work, xv, False, None)
            epoch_val = float(np.mean((score - yv) ** 2))
        else:
            epoch_val = train_hist[-1]
        val_hist.append(epoch_val)
        if not math.isfinite(epoch_val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        if epoch_val < best_loss:
            best_loss = epoch_val
            best_epoch = epoch
            best_weights = [w.copy() for w in work.weights]
            best_biases = [b.copy() for b in work.biases]

    work.weights = best_weights
    work.biases = best_biases
    history = TrainHistory(tuple(train_hist), tuple(val_hist), best_epoch)
    return work, history


def train(model: MlpModel, dataset, config: TrainConfig = TrainConfig(),
          noise=None):
    """Train on a DatasetSplit: fit on its train records, select the snapshot
    on its validation records. Features and targets come from the default
    feature construction (measured component values plus simulated waveform
    summaries against true values); ``noise`` overrides the measurement-noise
    spec applied during feature construction."""
    from .features import build_design_matrices

    kwargs = {} if noise is None else {"noise": noise}
    x_train, y_train = build_design_matrices(dataset.train, **kwargs)
    x_val, y_val = build_design_matrices(dataset.validation, **kwargs)
    return train_arrays(model, x_train, y_train, x_val, y_val, config)


@dataclass(frozen=True)
class RegressionMetrics:
    """Per-output test metrics in original units. An R² entry is NaN when
    the target column has zero variance (flagged, not an error)."""

    output_names: tuple[str, ...]
    mse: tuple[float, ...]
    r2: tuple[float, ...]
    overall_mse: float

    def to_dict(self) -> dict:
        report = {
            name: {
                "mse": m,
                "r2": None if math.isnan(r) else r,
            }
            for name, m, r in zip(self.output_names, self.mse, self.r2)
        }
        report["overall_mse"] = self.overall_mse
        return report


def regression_metrics(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    output_names: tuple[str, ...] | None = None,
) -> RegressionMetrics:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 2:
        raise ValidationError(
            f"y_true and y_pred must be matching 2-D arrays, got {y_true.shape} vs {y_pred.shape}"
        )
    if len(y_true) == 0:
        raise ValidationError("metrics need at least one row")
    if output_names is None:
        output_names = tuple(f"y{k}" for k in range(y_true.shape[1]))
    residual = y_pred - y_true
    mse = np.mean(residual**2, axis=0)
    ss_res = np.sum(residual**2, axis=0)
    ss_tot = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    r2 = np.where(ss_tot > 0.0, 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0), np.nan)
    return RegressionMetrics(
        output_names=tuple(output_names),
        mse=tuple(float(v) for v in mse),
        r2=tuple(float(v) for v in r2),
        overall_mse=float(np.mean(residual**2)),
    )


def evaluate(model: MlpModel, x_test: np.ndarray, y_test: np.ndarray) -> RegressionMetrics:
    """Per-output MSE and R² on a test set, in original units."""
    from .degradation import TARGET_FIELDS

    x_test, _ = _as_batch(x_test, model.layer_sizes[0], "x_test")
    y_test, _ = _as_batch(y_test, model.layer_sizes[-1], "y_test")
    names = TARGET_FIELDS if len(TARGET_FIELDS) == model.layer_sizes[-1] else None
    return regression_metrics(y_test, predict(model, x_test), names)


CHECKPOINT_VERSION = 1


def save_model(model: MlpModel, path: str):
    """Write an .npz checkpoint: version, sizes, rates, stats, weights."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "layer_sizes": np.array(model.layer_sizes),
        "dropout_rates": np.array(model.dropout_rates),
        "x_mean": model.x_mean,
        "x_std": model.x_std,
        "y_mean": model.y_mean,
        "y_std": model.y_std,
    }
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        payload[f"W{k}"] = w
        payload[f"b{k}"] = b
    np.savez(path, **payload)


def load_model(path: str) -> MlpModel:
    with np.load(path) as data:
        if int(data["version"]) != CHECKPOINT_VERSION:
            raise ValidationError(
                f"unsupported checkpoint version {int(data['version'])}"
            )
        sizes = tuple(int(s) for s in data["layer_sizes"])
        n_layers = len(sizes) - 1
        return MlpModel(
            layer_sizes=sizes,
            weights=[data[f"W{k}"] for k in range(n_layers)],
            biases=[data[f"b{k}"] for k in range(n_layers)],
            dropout_rates=tuple(float(r) for r in data["dropout_rates"]),
            x_mean=data["x_mean"],
            x_std=data["x_std"],
            y_mean=data["y_mean"],
            y_std=data["y_std"],
        )
