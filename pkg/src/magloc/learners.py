"""Natively implemented classifiers: kNN, random forest, gradient-boosted trees,
and the full-signal nearest-neighbor matcher.

Trees are CART with Gini impurity (classification) or variance reduction
(regression for boosting residuals); everything is deterministic given the
seed, with per-tree RNG substreams so forests parallelize without changing
results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distances import DistanceKind, distance
from .errors import ConfigurationError, DimensionError, SchemaMismatchError
from .features import FeatureVector

MODEL_KINDS = ("knn", "random_forest", "gbt", "full_signal")


@dataclass(frozen=True)
class ForestConfig:
    trees: int = 100
    max_depth: int = 8
    min_leaf: int = 2
    features_per_split: str = "sqrt"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigurationError("forest sizes must be >= 1")
        if self.features_per_split not in ("sqrt", "all"):
            raise ConfigurationError("features_per_split must be 'sqrt' or 'all'")


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 100
    depth: int = 3
    learning_rate: float = 0.1
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds < 0 or self.depth < 1 or self.min_leaf < 1:
            raise ConfigurationError("gbt sizes must be valid")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")


@dataclass
class Tree:
    """Array-encoded binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray       # (nodes, K) class distribution, or (nodes, 1) regression
    impurity: np.ndarray
    n_samples: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf value row per query row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            interior = feat >= 0
            if not interior.any():
                break
            rows = np.flatnonzero(interior)
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(
                go_left, self.left[node[rows]], self.right[node[rows]]
            )
        return self.value[node]


@dataclass
class TrainedModel:
    """A fitted classifier plus everything needed to reproduce predictions."""

    kind: str
    class_set: tuple[str, ...]
    schema: tuple[str, ...] | None
    seed: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")


def _gini(counts: np.ndarray, total: int) -> float:
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _find_classification_split(
    X: np.ndarray,
    y: np.ndarray,
    feats: np.ndarray,
    min_leaf: int,
    n_classes: int,
) -> tuple[int, float, float] | None:
    """(feature, threshold, impurity reduction) of the best Gini split, or None.

    Vectorized over the candidate features: one argsort per feature column,
    then cumulative class counts give every split's Gini in closed form.
    """
    n = X.shape[0]
    total = np.bincount(y, minlength=n_classes).astype(np.float64)
    parent = _gini(total, n)
    cols = X[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)           # (n, F)
    ys = y[order]                                          # (n, F)
    onehot = np.zeros((n, len(feats), n_classes))
    np.put_along_axis(onehot, ys[:, :, None], 1.0, axis=2)
    left = np.cumsum(onehot, axis=0)[:-1]                  # (n-1, F, K)
    right = total[None, None, :] - left
    sizes_left = np.arange(1, n, dtype=np.float64)[:, None]
    sizes_right = n - sizes_left
    gini_left = 1.0 - np.sum((left / sizes_left[:, :, None]) ** 2, axis=2)
    gini_right = 1.0 - np.sum((right / sizes_right[:, :, None]) ** 2, axis=2)
    gain = parent - (sizes_left * gini_left + sizes_right * gini_right) / n
    valid = (
        (xs[1:] > xs[:-1]) & (sizes_left >= min_leaf) & (sizes_right >= min_leaf)
    )
    gain[~valid] = -np.inf
    per_feature = gain.max(axis=0)
    best_gain = float(per_feature.max())
    if best_gain <= 0.0 or not np.isfinite(best_gain):
        return None
    # ties resolve like a sequential scan: earliest feature in `feats`, then
    # the earliest split position within it
    f_pos = int(np.argmax(per_feature == best_gain))
    j = int(np.argmax(gain[:, f_pos]))
    # the threshold is a training value, not a midpoint: routing then depends
    # only on the ordering against data points, which keeps predictions
    # invariant under strictly monotone feature transforms
    return (int(feats[f_pos]), float(xs[j, f_pos]), best_gain)


def _find_regression_split(
    X: np.ndarray, y: np.ndarray, feats: np.ndarray, min_leaf: int
) -> tuple[int, float, float] | None:
    """(feature, threshold, SSE reduction) of the best variance split, or None."""
    n = X.shape[0]
    parent_sse = float(np.sum((y - y.mean()) ** 2))
    cols = X[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)           # (n, F)
    ys = y[order]                                          # (n, F)
    s1 = np.cumsum(ys, axis=0)[:-1]
    s2 = np.cumsum(ys * ys, axis=0)[:-1]
    t1 = ys.sum(axis=0)[None, :] - s1
    t2 = np.sum(ys * ys, axis=0)[None, :] - s2
    sizes_left = np.arange(1, n, dtype=np.float64)[:, None]
    sizes_right = n - sizes_left
    sse = (s2 - s1 * s1 / sizes_left) + (t2 - t1 * t1 / sizes_right)
    gain = parent_sse - sse
    valid = (
        (xs[1:] > xs[:-1]) & (sizes_left >= min_leaf) & (sizes_right >= min_leaf)
    )
    gain[~valid] = -np.inf
    per_feature = gain.max(axis=0)
    best_gain = float(per_feature.max())
    if best_gain <= 0.0 or not np.isfinite(best_gain):
        return None
    f_pos = int(np.argmax(per_feature == best_gain))
    j = int(np.argmax(gain[:, f_pos]))
    return (int(feats[f_pos]), float(xs[j, f_pos]), best_gain)


class _TreeBuilder:
    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        *,
        task: str,
        n_classes: int,
        max_depth: int,
        min_leaf: int,
        n_split_features: int,
        rng: np.random.Generator | None,
    ) -> None:
        self.X = X
        self.y = y
        self.task = task
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_split_features = n_split_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self.impurity: list[float] = []
        self.n_samples: list[int] = []

    def _node_value(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        if self.task == "classification":
            counts = np.bincount(y, minlength=self.n_classes).astype(np.float64)
            return counts / y.shape[0], _gini(counts, y.shape[0])
        mean = float(y.mean())
        return np.array([mean]), float(np.sum((y - mean) ** 2))

    def _alloc(self, y: np.ndarray) -> int:
        node = len(self.feature)
        value, impurity = self._node_value(y)
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.impurity.append(impurity)
        self.n_samples.append(y.shape[0])
        return node

    def grow(self, indices: np.ndarray, depth: int) -> int:
        y = self.y[indices]
        node = self._alloc(y)
        if depth >= self.max_depth or indices.shape[0] < 2 * self.min_leaf:
            return node
        if self.task == "classification" and np.all(y == y[0]):
            return node
        n_features = self.X.shape[1]
        if self.rng is not None and self.n_split_features < n_features:
            feats = self.rng.choice(n_features, self.n_split_features, replace=False)
        else:
            feats = np.arange(n_features)
        X_node = self.X[indices]
        if self.task == "classification":
            split = _find_classification_split(
                X_node, y, feats, self.min_leaf, self.n_classes
            )
        else:
            split = _find_regression_split(X_node, y, feats, self.min_leaf)
        if split is None:
            return node
        f, thr, _ = split
        mask = X_node[:, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.grow(indices[mask], depth + 1)
        self.right[node] = self.grow(indices[~mask], depth + 1)
        return node

    def build(self) -> Tree:
        self.grow(np.arange(self.X.shape[0]), 0)
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.stack(self.value),
            impurity=np.asarray(self.impurity),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
        )


def _check_training_set(train: Sequence[FeatureVector], labels: Sequence[str]):
    if len(train) != len(labels):
        raise DimensionError("one label per training vector required")
    if not train:
        raise ConfigurationError("training set must be non-empty")
    schema = train[0].schema
    for fv in train:
        if fv.schema != schema:
            raise SchemaMismatchError("training vectors must share one schema")
    X = np.stack([fv.values for fv in train])
    class_set = tuple(sorted(set(labels)))
    index = {c: i for i, c in enumerate(class_set)}
    y = np.array([index[lab] for lab in labels], dtype=np.int64)
    return X, y, class_set, schema


def _knn_vote(
    X: np.ndarray, y: np.ndarray, n_classes: int, query: np.ndarray, k: int
) -> tuple[int, np.ndarray]:
    """(class index, vote fractions) of the k nearest training rows.

    Vote ties break on the smaller summed neighbor distance, then on the
    lower class index (class sets are lexicographically ordered).
    """
    diff = X - query
    d = np.sqrt(np.sum(diff * diff, axis=1))
    order = np.argsort(d, kind="stable")[:k]
    votes = np.bincount(y[order], minlength=n_classes)
    scores = votes / k
    top = votes.max()
    contenders = np.flatnonzero(votes == top)
    if contenders.shape[0] == 1:
        return int(contenders[0]), scores
    sums = np.array([d[order][y[order] == c].sum() for c in contenders])
    return int(contenders[int(np.argmin(sums))]), scores


def knn_classify(
    train: Sequence[FeatureVector],
    labels: Sequence[str],
    query: FeatureVector,
    k: int = 5,
) -> tuple[str, dict[str, float]]:
    """Majority vote over the k nearest training vectors by Euclidean distance."""
    X, y, class_set, schema = _check_training_set(train, labels)
    if not 1 <= k <= len(train):
        raise ConfigurationError(f"k must lie in [1, {len(train)}]")
    if query.schema != schema:
        raise SchemaMismatchError("query schema differs from training schema")
    winner, scores = _knn_vote(X, y, len(class_set), query.values, k)
    return class_set[winner], dict(zip(class_set, scores.tolist()))


def train_knn(
    train: Sequence[FeatureVector], labels: Sequence[str], k: int = 5, seed: int = 0
) -> TrainedModel:
    X, y, class_set, schema = _check_training_set(train, labels)
    if not 1 <= k <= len(train):
        raise ConfigurationError(f"k must lie in [1, {len(train)}]")
    return TrainedModel(
        kind="knn",
        class_set=class_set,
        schema=schema,
        seed=seed,
        payload={"X": X, "y": y, "k": k},
    )


def train_random_forest(
    train: Sequence[FeatureVector],
    labels: Sequence[str],
    cfg: ForestConfig = ForestConfig(),
) -> TrainedModel:
    """Bootstrap-sampled Gini CART forest; per-tree RNG substreams keep it
    reproducible regardless of training order."""
    X, y, class_set, schema = _check_training_set(train, labels)
    n, n_features = X.shape
    if n < 2:
        raise ConfigurationError("random forest needs >= 2 training vectors")
    k_classes = len(class_set)
    if cfg.features_per_split == "sqrt":
        n_split = max(1, int(np.sqrt(n_features))) if n_features else 0
    else:
        n_split = n_features
    trees: list[Tree] = []
    oob_proba = np.zeros((n, k_classes))
    oob_counts = np.zeros(n)
    for t in range(cfg.trees):
        rng = np.random.default_rng((cfg.seed, t))
        boot = rng.integers(0, n, n)
        builder = _TreeBuilder(
            X[boot],
            y[boot],
            task="classification",
            n_classes=k_classes,
            max_depth=cfg.max_depth,
            min_leaf=cfg.min_leaf,
            n_split_features=n_split,
            rng=rng,
        )
        tree = builder.build()
        trees.append(tree)
        oob = np.setdiff1d(np.arange(n), boot)
        if oob.shape[0]:
            oob_proba[oob] += tree.apply(X[oob])
            oob_counts[oob] += 1
    covered = oob_counts > 0
    oob_accuracy = None
    if covered.any():
        preds = np.argmax(oob_proba[covered], axis=1)
        oob_accuracy = float(np.mean(preds == y[covered]))
    return TrainedModel(
        kind="random_forest",
        class_set=class_set,
        schema=schema,
        seed=cfg.seed,
        payload={"trees": trees, "config": cfg, "oob_accuracy": oob_accuracy},
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


def train_gbt(
    train: Sequence[FeatureVector],
    labels: Sequence[str],
    cfg: GbtConfig = GbtConfig(),
) -> TrainedModel:
    """One-vs-rest gradient boosting on logistic loss with regression trees.

    Plain first-order boosting: each round fits a tree to the residual
    y - sigmoid(margin) per class and steps by the learning rate. Initial
    margins are the log-odds of the class frequencies; prediction applies a
    softmax over the class margins.
    """
    X, y, class_set, schema = _check_training_set(train, labels)
    n = X.shape[0]
    k_classes = len(class_set)
    freq = np.bincount(y, minlength=k_classes) / n
    clipped = np.clip(freq, 1e-12, 1.0 - 1e-12)
    init_margin = np.log(clipped / (1.0 - clipped))
    margins = np.tile(init_margin, (n, 1))
    onehot = np.zeros((n, k_classes))
    onehot[np.arange(n), y] = 1.0
    rounds: list[list[Tree]] = []
    for _ in range(cfg.rounds):
        this_round: list[Tree] = []
        for c in range(k_classes):
            residual = onehot[:, c] - _sigmoid(margins[:, c])
            builder = _TreeBuilder(
                X,
                residual,
                task="regression",
                n_classes=0,
                max_depth=cfg.depth,
                min_leaf=cfg.min_leaf,
                n_split_features=X.shape[1],
                rng=None,
            )
            tree = builder.build()
            this_round.append(tree)
            margins[:, c] += cfg.learning_rate * tree.apply(X)[:, 0]
        rounds.append(this_round)
    return TrainedModel(
        kind="gbt",
        class_set=class_set,
        schema=schema,
        seed=cfg.seed,
        payload={"init_margin": init_margin, "rounds": rounds, "config": cfg},
    )


def _softmax(margins: np.ndarray) -> np.ndarray:
    z = margins - margins.max()
    e = np.exp(z)
    return e / e.sum()


def _model_proba(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    k_classes = len(model.class_set)
    if model.kind == "knn":
        p = model.payload
        _, scores = _knn_vote(p["X"], p["y"], k_classes, x, p["k"])
        return scores
    if model.kind == "random_forest":
        rows = x[None, :]
        proba = np.zeros(k_classes)
        for tree in model.payload["trees"]:
            proba += tree.apply(rows)[0]
        return proba / len(model.payload["trees"])
    if model.kind == "gbt":
        p = model.payload
        margins = p["init_margin"].copy()
        lr = p["config"].learning_rate
        rows = x[None, :]
        for this_round in p["rounds"]:
            for c, tree in enumerate(this_round):
                margins[c] += lr * tree.apply(rows)[0, 0]
        return _softmax(margins)
    raise ConfigurationError(
        f"predict() needs feature vectors; {model.kind!r} models classify raw series"
    )


def predict(model: TrainedModel, x: FeatureVector) -> tuple[str, dict[str, float]]:
    """Label and class-probability map; probabilities sum to 1 within 1e-9."""
    if model.schema is not None and x.schema != model.schema:
        raise SchemaMismatchError("query schema differs from model schema")
    proba = _model_proba(model, x.values)
    total = proba.sum()
    if total > 0:
        proba = proba / total
    else:
        proba = np.full(len(model.class_set), 1.0 / len(model.class_set))
    winner = int(np.argmax(proba))
    return model.class_set[winner], dict(zip(model.class_set, proba.tolist()))


def full_signal_classify(
    train_series: Sequence[np.ndarray],
    labels: Sequence[str],
    query: np.ndarray,
    kind: DistanceKind,
) -> tuple[str, float]:
    """1-NN label over the chosen distance; ties go to the earlier training item.

    Non-DTW kernels require equal lengths: segment observations to a common
    window before matching.
    """
    if len(train_series) != len(labels) or not train_series:
        raise DimensionError("one label per non-empty training series required")
    query = np.asarray(query, dtype=np.float64)
    if kind.tag != "dtw":
        for s in train_series:
            if len(s) != query.shape[0]:
                raise DimensionError(
                    f"{kind.tag} matching requires equal lengths; "
                    "segment to a common window first"
                )
    best_label, best_d = labels[0], np.inf
    for s, lab in zip(train_series, labels):
        d = distance(np.asarray(s, dtype=np.float64), query, kind)
        if d < best_d:
            best_d, best_label = d, lab
    return best_label, float(best_d)


def train_full_signal(
    train_series: Sequence[np.ndarray],
    labels: Sequence[str],
    kind: DistanceKind,
    seed: int = 0,
) -> TrainedModel:
    if len(train_series) != len(labels) or not train_series:
        raise DimensionError("one label per non-empty training series required")
    return TrainedModel(
        kind="full_signal",
        class_set=tuple(sorted(set(labels))),
        schema=None,
        seed=seed,
        payload={
            "series": [np.asarray(s, dtype=np.float64) for s in train_series],
            "labels": tuple(labels),
            "distance": kind,
        },
    )


def classify_series(model: TrainedModel, query: np.ndarray) -> tuple[str, float]:
    if model.kind != "full_signal":
        raise ConfigurationError("classify_series requires a full_signal model")
    p = model.payload
    return full_signal_classify(p["series"], p["labels"], query, p["distance"])
