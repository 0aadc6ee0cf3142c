"""Siamese 1-D convolutional embedding trained with a contrastive pair loss.

Both branches evaluate one shared parameter set, so the pair network is
literally two calls of the same forward function. The stack per block is
valid convolution (kernel 5) -> ReLU -> width-2 max pool; a global average
over the remaining time axis feeds an affine map to the 100-value embedding.
Gradients are hand-derived and validated against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ConfigurationError,
    DimensionError,
    InvalidWindowError,
    TrainingDivergedError,
)

#: Filter count paired to the convolution depth.
FILTERS_BY_DEPTH = {2: 4, 3: 8, 4: 16}

EMBEDDING_DIM = 100


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and training hyperparameters."""

    conv_layers: int = 2
    kernel_width: int = 5
    pool_width: int = 2
    margin: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    pairs_per_epoch: int = 512
    embedding_dim: int = EMBEDDING_DIM
    seed: int = 0

    def __post_init__(self) -> None:
        if self.conv_layers not in FILTERS_BY_DEPTH:
            raise ConfigurationError(
                f"conv_layers must be one of {sorted(FILTERS_BY_DEPTH)}"
            )
        if self.embedding_dim != EMBEDDING_DIM:
            raise ConfigurationError(f"embedding_dim is fixed at {EMBEDDING_DIM}")
        if self.pool_width != 2:
            raise ConfigurationError("pool_width is fixed at 2")
        if self.kernel_width < 2:
            raise ConfigurationError("kernel_width must be >= 2")
        if self.margin <= 0 or self.learning_rate <= 0:
            raise ConfigurationError("margin and learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.pairs_per_epoch < 1:
            raise ConfigurationError("bad training sizes")

    @property
    def filters(self) -> int:
        return FILTERS_BY_DEPTH[self.conv_layers]

    def min_input_length(self) -> int:
        """Shortest series the conv/pool stack can reduce without emptying."""
        required = 1
        for _ in range(self.conv_layers):
            required = max(2 * required + self.kernel_width - 1, self.kernel_width)
        return required


@dataclass
class Network:
    """Shared parameter store for both branches, plus training history."""

    config: NetworkConfig
    conv_w: list[np.ndarray]
    conv_b: list[np.ndarray]
    fc_w: np.ndarray
    fc_b: np.ndarray
    history: list[float] = field(default_factory=list)

    def parameters(self) -> list[np.ndarray]:
        """Live references to every parameter array (single store)."""
        return [*self.conv_w, *self.conv_b, self.fc_w, self.fc_b]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())


def init_network(cfg: NetworkConfig, seed: int | None = None) -> Network:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng((cfg.seed if seed is None else seed, 11))
    k = cfg.kernel_width
    f = cfg.filters
    conv_w: list[np.ndarray] = []
    conv_b: list[np.ndarray] = []
    c_in = 1
    for _ in range(cfg.conv_layers):
        bound = np.sqrt(6.0 / (c_in * k + f * k))
        conv_w.append(rng.uniform(-bound, bound, size=(f, c_in, k)))
        conv_b.append(np.zeros(f))
        c_in = f
    bound = np.sqrt(6.0 / (f + EMBEDDING_DIM))
    fc_w = rng.uniform(-bound, bound, size=(EMBEDDING_DIM, f))
    fc_b = np.zeros(EMBEDDING_DIM)
    return Network(cfg, conv_w, conv_b, fc_w, fc_b)


def zero_network(cfg: NetworkConfig) -> Network:
    """All-zero parameters; forward emits the zero embedding."""
    net = init_network(cfg, seed=0)
    for p in net.parameters():
        p[...] = 0.0
    return net


def _forward_batch(net: Network, X: np.ndarray) -> tuple[np.ndarray, list, np.ndarray, int]:
    """Embeddings for a (batch, time) input plus the caches backward needs."""
    cfg = net.config
    if X.ndim != 2:
        raise DimensionError("forward expects a (batch, time) array")
    if X.shape[1] < cfg.min_input_length():
        raise InvalidWindowError(
            f"series length {X.shape[1]} is below the receptive field "
            f"({cfg.min_input_length()}) of a {cfg.conv_layers}-layer stack"
        )
    a = X[:, None, :]
    caches = []
    for w, b in zip(net.conv_w, net.conv_b):
        windows = sliding_window_view(a, cfg.kernel_width, axis=2)
        z = np.einsum("ncti,oci->not", windows, w, optimize=True) + b[None, :, None]
        r = np.maximum(z, 0.0)
        t_pairs = r.shape[2] // 2
        stacked = r[:, :, : 2 * t_pairs].reshape(r.shape[0], r.shape[1], t_pairs, 2)
        arg = stacked.argmax(axis=3)
        pooled = np.take_along_axis(stacked, arg[..., None], axis=3)[..., 0]
        caches.append((windows, z, arg, r.shape[2]))
        a = pooled
    t_final = a.shape[2]
    g = a.mean(axis=2)
    e = g @ net.fc_w.T + net.fc_b[None, :]
    return e, caches, g, t_final


def _backward_batch(
    net: Network,
    caches: list,
    g: np.ndarray,
    t_final: int,
    de: np.ndarray,
) -> dict[str, list[np.ndarray] | np.ndarray]:
    """Parameter gradients for upstream embedding gradients ``de``."""
    cfg = net.config
    grads_w = [np.zeros_like(w) for w in net.conv_w]
    grads_b = [np.zeros_like(b) for b in net.conv_b]
    dfc_w = de.T @ g
    dfc_b = de.sum(axis=0)
    da = (de @ net.fc_w)[:, :, None] / t_final
    da = np.broadcast_to(da, (de.shape[0], net.fc_w.shape[1], t_final)).copy()
    for layer in reversed(range(cfg.conv_layers)):
        windows, z, arg, t_conv = caches[layer]
        n, f, t_pairs = da.shape
        dr = np.zeros((n, f, t_pairs, 2))
        np.put_along_axis(dr, arg[..., None], da[..., None], axis=3)
        dz = np.zeros((n, f, t_conv))
        dz[:, :, : 2 * t_pairs] = dr.reshape(n, f, 2 * t_pairs)
        dz *= z > 0.0
        grads_w[layer] = np.einsum("not,ncti->oci", dz, windows, optimize=True)
        grads_b[layer] = dz.sum(axis=(0, 2))
        if layer > 0:
            k = cfg.kernel_width
            dzp = np.pad(dz, ((0, 0), (0, 0), (k - 1, k - 1)))
            winz = sliding_window_view(dzp, k, axis=2)
            da = np.einsum(
                "noti,oci->nct", winz, net.conv_w[layer][:, :, ::-1], optimize=True
            )
    return {"conv_w": grads_w, "conv_b": grads_b, "fc_w": dfc_w, "fc_b": dfc_b}


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Embedding (length 100) of one series."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("forward expects a 1-D series")
    e, _, _, _ = _forward_batch(net, x[None, :])
    return e[0]


def contrastive_loss(e1: np.ndarray, e2: np.ndarray, same: bool, margin: float = 1.0) -> float:
    """d^2 for same-class pairs, hinge max(0, margin - d)^2 otherwise."""
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape:
        raise DimensionError("embeddings must have equal dimensions")
    d = float(np.sqrt(np.sum((e1 - e2) ** 2)))
    if same:
        return d * d
    hinge = max(0.0, margin - d)
    return hinge * hinge


def _pair_loss_grads(
    e1: np.ndarray, e2: np.ndarray, same: np.ndarray, margin: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair losses and d loss / d e1 (d e2 is its negation).

    At d == 0 the hinge branch takes the zero subgradient.
    """
    diff = e1 - e2
    d = np.sqrt(np.sum(diff * diff, axis=1))
    losses = np.where(same, d * d, np.maximum(0.0, margin - d) ** 2)
    safe_d = np.where(d > 0.0, d, 1.0)
    scale_same = 2.0
    scale_diff = np.where((d > 0.0) & (d < margin), -2.0 * (margin - d) / safe_d, 0.0)
    scale = np.where(same, scale_same, scale_diff)
    return losses, scale[:, None] * diff


def _sample_pairs(
    labels: Sequence[str], count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Balanced pair indices: half same-class, half different-class."""
    by_class: dict[str, np.ndarray] = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, [])
        by_class[lab].append(i)
    classes = sorted(by_class)
    members = {c: np.asarray(by_class[c]) for c in classes}
    lefts = np.empty(count, dtype=np.int64)
    rights = np.empty(count, dtype=np.int64)
    sameness = np.zeros(count, dtype=bool)
    for p in range(count):
        if p % 2 == 0:
            c = classes[int(rng.integers(len(classes)))]
            pool = members[c]
            replace = pool.shape[0] < 2
            pick = rng.choice(pool, size=2, replace=replace)
            lefts[p], rights[p] = int(pick[0]), int(pick[1])
            sameness[p] = True
        else:
            ca, cb = rng.choice(len(classes), size=2, replace=False)
            lefts[p] = int(rng.choice(members[classes[int(ca)]]))
            rights[p] = int(rng.choice(members[classes[int(cb)]]))
    return lefts, rights, sameness


def train_siamese(
    series_list: Sequence[np.ndarray],
    labels: Sequence[str],
    cfg: NetworkConfig,
    net: Network | None = None,
) -> Network:
    """Minibatch gradient descent on the contrastive loss over balanced pairs.

    Aborts with diagnostics when an epoch's mean loss exceeds 10x the first
    epoch's; epochs=0 returns the freshly initialized network unchanged.
    """
    if len(set(labels)) < 2:
        raise ConfigurationError("siamese training needs at least two classes")
    if len(series_list) != len(labels):
        raise DimensionError("one label per series required")
    X = np.stack([np.asarray(s, dtype=np.float64) for s in series_list])
    if net is None:
        net = init_network(cfg)
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng((cfg.seed, 7, epoch))
        lefts, rights, sameness = _sample_pairs(labels, cfg.pairs_per_epoch, rng)
        epoch_loss = 0.0
        for start in range(0, cfg.pairs_per_epoch, cfg.batch_size):
            li = lefts[start : start + cfg.batch_size]
            ri = rights[start : start + cfg.batch_size]
            same = sameness[start : start + cfg.batch_size]
            batch = np.concatenate([X[li], X[ri]])
            e, caches, g, t_final = _forward_batch(net, batch)
            half = li.shape[0]
            losses, de1 = _pair_loss_grads(e[:half], e[half:], same, cfg.margin)
            epoch_loss += float(losses.sum())
            de = np.concatenate([de1, -de1]) / half
            grads = _backward_batch(net, caches, g, t_final, de)
            for w, gw in zip(net.conv_w, grads["conv_w"]):
                w -= lr * gw
            for b, gb in zip(net.conv_b, grads["conv_b"]):
                b -= lr * gb
            net.fc_w -= lr * grads["fc_w"]
            net.fc_b -= lr * grads["fc_b"]
        mean_loss = epoch_loss / cfg.pairs_per_epoch
        net.history.append(mean_loss)
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"epoch {epoch} mean loss is non-finite; lower the learning rate"
            )
        if epoch > 0 and net.history[0] > 0 and mean_loss > 10.0 * net.history[0]:
            raise TrainingDivergedError(
                f"epoch {epoch} mean loss {mean_loss:.6g} exceeds 10x initial "
                f"{net.history[0]:.6g}; lower the learning rate"
            )
    return net


def embed_many(net: Network, series_list: Sequence[np.ndarray]) -> np.ndarray:
    X = np.stack([np.asarray(s, dtype=np.float64) for s in series_list])
    e, _, _, _ = _forward_batch(net, X)
    return e


def embed_classify(
    net: Network,
    support_series: Sequence[np.ndarray],
    support_labels: Sequence[str],
    query: np.ndarray,
    k: int = 1,
) -> tuple[str, dict[str, float]]:
    """kNN (Euclidean) over support embeddings in the learned space."""
    from .learners import _knn_vote

    if not support_series:
        raise ConfigurationError("embed_classify needs a non-empty support set")
    if not 1 <= k <= len(support_series):
        raise ConfigurationError(f"k must lie in [1, {len(support_series)}]")
    class_set = tuple(sorted(set(support_labels)))
    index = {c: i for i, c in enumerate(class_set)}
    y = np.array([index[lab] for lab in support_labels], dtype=np.int64)
    support = embed_many(net, support_series)
    q = forward(net, np.asarray(query, dtype=np.float64))
    winner, scores = _knn_vote(support, y, len(class_set), q, k)
    return class_set[winner], dict(zip(class_set, scores.tolist()))


def _pair_loss(net: Network, x1: np.ndarray, x2: np.ndarray, same: bool) -> float:
    return contrastive_loss(forward(net, x1), forward(net, x2), same, net.config.margin)


def gradient_check(
    net: Network,
    x1: np.ndarray,
    x2: np.ndarray,
    same: bool,
    n_coords: int = 200,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples at least ``n_coords`` parameter coordinates (all of them when the
    network is smaller) and returns max |analytic - numeric| / max(1, |numeric|).
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    batch = np.stack([x1, x2])
    e, caches, g, t_final = _forward_batch(net, batch)
    _, de1 = _pair_loss_grads(
        e[0:1], e[1:2], np.array([same]), net.config.margin
    )
    de = np.concatenate([de1, -de1])
    grads = _backward_batch(net, caches, g, t_final, de)
    flat_analytic = np.concatenate(
        [g_.ravel() for g_ in grads["conv_w"]]
        + [g_.ravel() for g_ in grads["conv_b"]]
        + [grads["fc_w"].ravel(), grads["fc_b"].ravel()]
    )
    params = net.parameters()
    total = sum(p.size for p in params)
    rng = np.random.default_rng((seed, 13))
    coords = (
        np.arange(total)
        if total <= n_coords
        else np.sort(rng.choice(total, size=n_coords, replace=False))
    )
    offsets = np.cumsum([0] + [p.size for p in params])
    worst = 0.0
    for coord in coords:
        p_idx = int(np.searchsorted(offsets, coord, side="right")) - 1
        local = int(coord - offsets[p_idx])
        flat = params[p_idx].ravel()
        original = flat[local]
        flat[local] = original + step
        loss_plus = _pair_loss(net, x1, x2, same)
        flat[local] = original - step
        loss_minus = _pair_loss(net, x1, x2, same)
        flat[local] = original
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        analytic = flat_analytic[coord]
        worst = max(worst, abs(analytic - numeric) / max(1.0, abs(numeric)))
    return worst
