"""Method-spec grammar and the per-fold fit/predict drivers used by protocols.

A method spec is ``<features>`` or ``<features>:<classifier>`` with features in
{match-dtw, match-euclid, match-cosine, match-bhatt, stats, shapelet, combined,
siamese-c2, siamese-c3, siamese-c4} and classifier in {knn, rf, gbt} where a
classifier applies. The frequency domain switches statistical descriptors to
the spectral view and shapelet discovery to the GCC distance; siamese methods
support the time domain only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .distances import DistanceKind
from .errors import ConfigurationError
from .evaluation import SegmentRecord
from .features import DescriptorConfig, FeatureVector, combine, extract_descriptors
from .learners import (
    ForestConfig,
    GbtConfig,
    TrainedModel,
    classify_series,
    predict,
    train_full_signal,
    train_gbt,
    train_knn,
    train_random_forest,
)
from .shapelets import (
    ObservationSeries,
    ShapeletConfig,
    ShapeletDictionary,
    extract_from_groups,
    shapelet_transform,
)
from .siamese import Network, NetworkConfig, embed_many, init_network, train_siamese

MATCH_DISTANCES = {
    "match-dtw": "dtw",
    "match-euclid": "euclidean",
    "match-cosine": "cosine",
    "match-bhatt": "bhattacharyya",
}

FEATURE_FAMILIES = ("stats", "shapelet", "combined")

CLASSIFIERS = ("knn", "rf", "gbt")

DOMAINS = ("time", "frequency")


@dataclass(frozen=True)
class MethodSpec:
    family: str                      # match | stats | shapelet | combined | siamese
    distance_tag: str | None = None  # match only
    classifier: str | None = None    # feature families only
    conv_layers: int | None = None   # siamese only

    def describe(self) -> str:
        if self.family == "match":
            return f"match-{self.distance_tag}"
        if self.family == "siamese":
            return f"siamese-c{self.conv_layers}"
        return f"{self.family}:{self.classifier}"


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob a protocol run needs, serializable into reports."""

    window: int = 60
    domain: str = "time"
    seed: int = 0
    knn_k: int = 5
    embed_k: int = 1
    descriptor: DescriptorConfig = DescriptorConfig()
    shapelet: ShapeletConfig = ShapeletConfig()
    forest: ForestConfig = ForestConfig()
    gbt: GbtConfig = GbtConfig()
    network: NetworkConfig = NetworkConfig()

    def __post_init__(self) -> None:
        if self.domain not in DOMAINS:
            raise ConfigurationError(f"domain must be one of {DOMAINS}")
        if self.window < 2:
            raise ConfigurationError("window must be >= 2")

    def descriptor_for_domain(self) -> DescriptorConfig:
        if self.domain == "frequency":
            return replace(self.descriptor, domain="frequency")
        return self.descriptor

    def shapelet_for_domain(self) -> ShapeletConfig:
        if self.domain == "frequency":
            return replace(self.shapelet, domain="gcc")
        return self.shapelet

    def snapshot(self) -> dict:
        out = asdict(self)
        out["shapelet"]["length_set"] = list(self.shapelet.length_set)
        return out


def parse_method(method: str, config: PipelineConfig | None = None) -> MethodSpec:
    """Validate and decompose a method string (and its domain combination)."""
    method = method.strip()
    head, _, tail = method.partition(":")
    if head in MATCH_DISTANCES:
        if tail:
            raise ConfigurationError(f"{head} does not take a classifier")
        return MethodSpec(family="match", distance_tag=MATCH_DISTANCES[head])
    if head.startswith("siamese-c"):
        if tail:
            raise ConfigurationError(f"{head} does not take a classifier")
        try:
            layers = int(head.removeprefix("siamese-c"))
        except ValueError:
            raise ConfigurationError(f"bad siamese method {method!r}") from None
        if layers not in (2, 3, 4):
            raise ConfigurationError("siamese depth must be 2, 3, or 4")
        if config is not None and config.domain == "frequency":
            raise ConfigurationError(
                "siamese methods support the time domain only"
            )
        return MethodSpec(family="siamese", conv_layers=layers)
    if head in FEATURE_FAMILIES:
        classifier = tail or "rf"
        if classifier not in CLASSIFIERS:
            raise ConfigurationError(f"classifier must be one of {CLASSIFIERS}")
        return MethodSpec(family=head, classifier=classifier)
    raise ConfigurationError(f"unknown method {method!r}")


def method_names() -> list[str]:
    """Every supported method spec string."""
    out = list(MATCH_DISTANCES)
    for family in FEATURE_FAMILIES:
        out.extend(f"{family}:{clf}" for clf in CLASSIFIERS)
    out.extend(f"siamese-c{c}" for c in (2, 3, 4))
    return out


def fold_seed(base_seed: int, fold_index: int) -> int:
    """Stable per-fold RNG seed derived from (run seed, fold index)."""
    return int(np.random.SeedSequence((base_seed, fold_index)).generate_state(1)[0])


def _group_runs(records: Sequence[SegmentRecord]) -> dict[str, list[ObservationSeries]]:
    """Per class: one ObservationSeries per observation, with consecutive
    segments concatenated into contiguous runs."""
    by_obs: dict[int, list[SegmentRecord]] = {}
    for rec in records:
        by_obs.setdefault(rec.obs_index, []).append(rec)
    groups: dict[str, list[ObservationSeries]] = {}
    for obs_index in sorted(by_obs):
        recs = sorted(by_obs[obs_index], key=lambda r: r.segment_index)
        runs: list[np.ndarray] = []
        current: list[np.ndarray] = [recs[0].series]
        for prev, rec in zip(recs, recs[1:]):
            if rec.segment_index == prev.segment_index + 1:
                current.append(rec.series)
            else:
                runs.append(np.concatenate(current))
                current = [rec.series]
        runs.append(np.concatenate(current))
        first = recs[0]
        groups.setdefault(first.class_label, []).append(
            ObservationSeries(first.location_id, first.device_id, tuple(runs))
        )
    return groups


def _train_classifier(
    spec: MethodSpec,
    features: list[FeatureVector],
    labels: list[str],
    config: PipelineConfig,
    seed: int,
) -> TrainedModel:
    if spec.classifier == "knn":
        return train_knn(features, labels, k=min(config.knn_k, len(features)), seed=seed)
    if spec.classifier == "rf":
        return train_random_forest(features, labels, replace(config.forest, seed=seed))
    return train_gbt(features, labels, replace(config.gbt, seed=seed))


class _StandardScaler:
    """Train-set z-scoring reused on held-out vectors."""

    def __init__(self, train: Sequence[FeatureVector]) -> None:
        matrix = np.stack([fv.values for fv in train])
        self.schema = train[0].schema
        self.mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        self.constant = std == 0.0
        self.std = np.where(self.constant, 1.0, std)

    def transform(self, fv: FeatureVector) -> FeatureVector:
        z = (fv.values - self.mean) / self.std
        z[self.constant] = 0.0
        return FeatureVector(z, self.schema, fv.source)


class _FittedMethod:
    def predict_labels(self, records: Sequence[SegmentRecord]) -> list[str]:
        raise NotImplementedError


class _FittedMatcher(_FittedMethod):
    def __init__(self, model: TrainedModel) -> None:
        self.model = model

    def predict_labels(self, records: Sequence[SegmentRecord]) -> list[str]:
        kind: DistanceKind = self.model.payload["distance"]
        train = self.model.payload["series"]
        labels = self.model.payload["labels"]
        lengths = {len(s) for s in train}
        if (
            kind.tag == "euclidean"
            and len(lengths) == 1
            and all(r.series.shape[0] == next(iter(lengths)) for r in records)
        ):
            # same difference form as the scalar kernel, batched per query;
            # argmin takes the earliest of tied minima like the scan does
            matrix = np.stack(train)
            out = []
            for r in records:
                diff = matrix - r.series[None, :]
                d = np.sqrt(np.sum(diff * diff, axis=1))
                out.append(labels[int(np.argmin(d))])
            return out
        return [classify_series(self.model, r.series)[0] for r in records]


class _FittedFeatureMethod(_FittedMethod):
    def __init__(
        self,
        featurize,
        scaler: _StandardScaler,
        model: TrainedModel,
    ) -> None:
        self.featurize = featurize
        self.scaler = scaler
        self.model = model

    def predict_labels(self, records: Sequence[SegmentRecord]) -> list[str]:
        return [
            predict(self.model, self.scaler.transform(self.featurize(r)))[0]
            for r in records
        ]


class _FittedSiamese(_FittedMethod):
    def __init__(
        self,
        net: Network,
        support: np.ndarray,
        y: np.ndarray,
        class_set: tuple[str, ...],
        k: int,
    ) -> None:
        self.net = net
        self.support = support
        self.y = y
        self.class_set = class_set
        self.k = k

    def predict_labels(self, records: Sequence[SegmentRecord]) -> list[str]:
        from .learners import _knn_vote

        queries = embed_many(self.net, [r.series for r in records])
        out = []
        for q in queries:
            winner, _ = _knn_vote(self.support, self.y, len(self.class_set), q, self.k)
            out.append(self.class_set[winner])
        return out


def fit_fold(
    train_records: Sequence[SegmentRecord],
    spec: MethodSpec,
    config: PipelineConfig,
    fold_index: int,
) -> _FittedMethod:
    """Fit one method on one fold's training segments only."""
    if not train_records:
        raise ConfigurationError("cannot fit on an empty training fold")
    seed = fold_seed(config.seed, fold_index)
    labels = [r.class_label for r in train_records]

    if spec.family == "match":
        kind = DistanceKind(spec.distance_tag)
        model = train_full_signal(
            [r.series for r in train_records], labels, kind, seed=seed
        )
        return _FittedMatcher(model)

    if spec.family == "siamese":
        net_cfg = replace(
            config.network, conv_layers=spec.conv_layers, seed=seed
        )
        net = init_network(net_cfg)
        if net_cfg.epochs > 0:
            net = train_siamese(
                [r.series for r in train_records], labels, net_cfg, net=net
            )
        class_set = tuple(sorted(set(labels)))
        index = {c: i for i, c in enumerate(class_set)}
        support = embed_many(net, [r.series for r in train_records])
        y = np.array([index[lab] for lab in labels], dtype=np.int64)
        return _FittedSiamese(net, support, y, class_set, config.embed_k)

    descriptor_cfg = config.descriptor_for_domain()
    dictionary: ShapeletDictionary | None = None
    if spec.family in ("shapelet", "combined"):
        dictionary = extract_from_groups(
            _group_runs(train_records), config.shapelet_for_domain()
        )

    def featurize(record: SegmentRecord) -> FeatureVector:
        from .core import Segment

        seg = Segment(
            device_id=record.device_id,
            location_id=record.location_id,
            location_type=record.class_label,
            series=record.series,
            segment_index=record.segment_index,
        )
        if spec.family == "stats":
            return extract_descriptors(seg, descriptor_cfg)
        if spec.family == "shapelet":
            return shapelet_transform(record.series, dictionary)
        return combine(
            extract_descriptors(seg, descriptor_cfg),
            shapelet_transform(record.series, dictionary),
        )

    train_features = [featurize(r) for r in train_records]
    scaler = _StandardScaler(train_features)
    standardized = [scaler.transform(fv) for fv in train_features]
    model = _train_classifier(spec, standardized, labels, config, seed)
    return _FittedFeatureMethod(featurize, scaler, model)
