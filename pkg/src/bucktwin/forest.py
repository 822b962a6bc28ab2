"""Random-forest regression baseline (from scratch, CART-style).

Each tree greedily minimizes the summed per-output squared error of
axis-aligned splits; leaves predict the mean target vector of their
samples. Targets are standardized internally (statistics stored on the
model) so the variance-reduction criterion weighs all outputs on a common
scale. Trees train on bootstrap resamples by default, and each split
considers a random feature subset (the classic regression-forest rule
mtry = p/3 unless ``max_features`` overrides it) — the two randomizations
that distinguish a random forest from plain bagged trees. The forest
prediction is the mean over trees.

Split search is vectorized: per node and feature the candidate boundaries
come from one argsort, and left/right squared-error sums from prefix sums,
so no Python loop runs over samples.

Tree ``t`` draws its bootstrap resample and its per-split feature subsets
from ``default_rng((seed, t))``, making training deterministic under seed
and partitionable per tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class RfConfig:
    """``max_features`` is the number of randomly drawn candidate features
    per split; None applies the classic regression-forest rule max(1, p/3).
    """

    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    bootstrap: bool = True
    max_features: int | None = None
    seed: int = 0

    def validate(self):
        if self.n_trees < 1:
            raise ValidationError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 0:
            raise ValidationError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValidationError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}"
            )
        if self.max_features is not None and self.max_features < 1:
            raise ValidationError(
                f"max_features must be >= 1 or None, got {self.max_features}"
            )

    def features_per_split(self, n_features: int) -> int:
        if self.max_features is None:
            return max(1, n_features // 3)
        return min(self.max_features, n_features)


@dataclass
class _Tree:
    """Flat array representation; feature == -1 marks a leaf."""

    feature: np.ndarray     # (n_nodes,) int
    threshold: np.ndarray   # (n_nodes,) float
    left: np.ndarray        # (n_nodes,) int
    right: np.ndarray       # (n_nodes,) int
    value: np.ndarray       # (n_nodes, n_outputs) float


@dataclass
class RandomForestModel:
    config: RfConfig
    trees: list[_Tree]
    y_mean: np.ndarray
    y_std: np.ndarray
    n_features: int


def _best_split(
    x: np.ndarray, y: np.ndarray, min_leaf: int, candidates: np.ndarray
) -> tuple[int, float, np.ndarray] | None:
    """Lowest-SSE axis-aligned split over candidate features, or None.

    Returns (feature, threshold, left_mask). SSE of a group with prefix
    sums s and sq is sq_total - s_total^2 / count, summed over outputs.
    """
    n = len(x)
    best = None
    best_cost = np.inf
    for j in candidates:
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        ys = y[order]
        s = np.cumsum(ys, axis=0)
        sq = np.cumsum(ys**2, axis=0)
        total_s, total_sq = s[-1], sq[-1]
        counts = np.arange(1, n + 1, dtype=float)

        # split after position i (1-based count of left samples)
        i = np.arange(min_leaf, n - min_leaf + 1)
        if len(i) == 0:
            continue
        valid = xs[i - 1] < xs[i]
        if not np.any(valid):
            continue
        left_s, left_sq = s[i - 1], sq[i - 1]
        left_n = counts[i - 1][:, None]
        right_s = total_s - left_s
        right_sq = total_sq - left_sq
        right_n = n - left_n
        cost = (
            (left_sq - left_s**2 / left_n).sum(axis=1)
            + (right_sq - right_s**2 / right_n).sum(axis=1)
        )
        cost = np.where(valid, cost, np.inf)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = cost[k]
            threshold = 0.5 * (xs[i[k] - 1] + xs[i[k]])
            best = (int(j), float(threshold), best_cost)
    if best is None:
        return None
    j, threshold, _ = best
    parent_sse = float((y**2).sum() - (y.sum(axis=0) ** 2 / n).sum())
    if not best_cost < parent_sse - 1e-12:
        return None
    return j, threshold, x[:, j] <= threshold


def _grow_tree(
    x: np.ndarray, y: np.ndarray, config: RfConfig, rng: np.random.Generator
) -> _Tree:
    feature, threshold, left, right, value = [], [], [], [], []
    n_features = x.shape[1]
    mtry = config.features_per_split(n_features)

    def add_node(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(y[rows].mean(axis=0))
        if depth >= config.max_depth or len(rows) < 2 * config.min_samples_leaf:
            return node
        if mtry < n_features:
            candidates = rng.choice(n_features, size=mtry, replace=False)
        else:
            candidates = np.arange(n_features)
        split = _best_split(x[rows], y[rows], config.min_samples_leaf, candidates)
        if split is None:
            return node
        j, thr, left_mask = split
        feature[node] = j
        threshold[node] = thr
        left[node] = add_node(rows[left_mask], depth + 1)
        right[node] = add_node(rows[~left_mask], depth + 1)
        return node

    add_node(np.arange(len(x)), 0)
    return _Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
    )


def rf_train(x: np.ndarray, y: np.ndarray, config: RfConfig = RfConfig()) -> RandomForestModel:
    config.validate()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or len(x) != len(y):
        raise ValidationError(
            f"x and y must be 2-D with matching rows, got {x.shape} and {y.shape}"
        )
    if len(x) == 0:
        raise ValidationError("training set is empty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("training data contains non-finite values")

    y_mean = y.mean(axis=0)
    y_std = y.std(axis=0)
    y_std = np.where(y_std < 1e-12, 1.0, y_std)
    y_work = (y - y_mean) / y_std

    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng((config.seed, t))
        if config.bootstrap:
            rows = rng.integers(0, len(x), size=len(x))
        else:
            rows = np.arange(len(x))
        trees.append(_grow_tree(x[rows], y_work[rows], config, rng))
    return RandomForestModel(config, trees, y_mean, y_std, x.shape[1])


def _tree_predict(tree: _Tree, x: np.ndarray) -> np.ndarray:
    node = np.zeros(len(x), dtype=np.int64)
    active = tree.feature[node] >= 0
    while np.any(active):
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = x[rows, tree.feature[cur]] <= tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
        active = tree.feature[node] >= 0
    return tree.value[node]


def rf_predict(model: RandomForestModel, x: np.ndarray) -> np.ndarray:
    """Mean over trees, de-standardized; accepts one row or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValidationError(
            f"x must have {model.n_features} columns, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("x contains non-finite values")
    total = np.zeros((len(x), len(model.y_mean)))
    for tree in model.trees:
        total += _tree_predict(tree, x)
    out = total / len(model.trees) * model.y_std + model.y_mean
    return out[0] if single else out


FOREST_CHECKPOINT_VERSION = 1


def save_forest(model: RandomForestModel, path: str):
    """Write an .npz checkpoint: version, config, stats, per-tree arrays."""
    c = model.config
    payload = {
        "version": np.array(FOREST_CHECKPOINT_VERSION),
        "config": np.array(
            [
                c.n_trees,
                c.max_depth,
                c.min_samples_leaf,
                int(c.bootstrap),
                -1 if c.max_features is None else c.max_features,
                c.seed,
            ],
            dtype=np.int64,
        ),
        "y_mean": model.y_mean,
        "y_std": model.y_std,
        "n_features": np.array(model.n_features),
    }
    for i, tree in enumerate(model.trees):
        payload[f"t{i}_feature"] = tree.feature
        payload[f"t{i}_threshold"] = tree.threshold
        payload[f"t{i}_left"] = tree.left
        payload[f"t{i}_right"] = tree.right
        payload[f"t{i}_value"] = tree.value
    np.savez(path, **payload)


def load_forest(path: str) -> RandomForestModel:
    with np.load(path) as data:
        if int(data["version"]) != FOREST_CHECKPOINT_VERSION:
            raise ValidationError(
                f"unsupported forest checkpoint version {int(data['version'])}"
            )
        raw = data["config"]
        config = RfConfig(
            n_trees=int(raw[0]),
            max_depth=int(raw[1]),
            min_samples_leaf=int(raw[2]),
            bootstrap=bool(raw[3]),
            max_features=None if int(raw[4]) < 0 else int(raw[4]),
            seed=int(raw[5]),
        )
        trees = [
            _Tree(
                feature=data[f"t{i}_feature"],
                threshold=data[f"t{i}_threshold"],
                left=data[f"t{i}_left"],
                right=data[f"t{i}_right"],
                value=data[f"t{i}_value"],
            )
            for i in range(config.n_trees)
        ]
        return RandomForestModel(
            config=config,
            trees=trees,
            y_mean=data["y_mean"],
            y_std=data["y_std"],
            n_features=int(data["n_features"]),
        )
