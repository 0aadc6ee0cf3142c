"""The three evaluation protocols, confusion matrices, and report aggregation.

Protocols: ``all`` (per observation, 3 random test segments vs 7 train, 30
iterations), ``lpo`` (leave one place out), and ``ldo`` (leave one device
out). Every fold fits on training segments only; a leakage guard aborts on any
train/test contamination. Segment predictions are majority-voted up to the
observation level, which is the headline granularity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DEFAULT_WINDOW, Dataset, segment
from .errors import ConfigurationError, InvalidWindowError, LeakageError

PROTOCOLS = ("all", "lpo", "ldo")

ALL_PLACES_ITERATIONS = 30
ALL_PLACES_TEST_SEGMENTS = 3
ALL_PLACES_TRAIN_SEGMENTS = 7


@dataclass(frozen=True)
class SegmentRecord:
    """One segment plus the identity of the observation it came from."""

    obs_index: int
    segment_index: int
    class_label: str
    location_id: str
    device_id: str
    series: np.ndarray


def build_segment_table(
    dataset: Dataset, window: int = DEFAULT_WINDOW
) -> tuple[SegmentRecord, ...]:
    records: list[SegmentRecord] = []
    for obs_index, obs in enumerate(dataset.observations):
        for seg in segment(obs, window):
            records.append(
                SegmentRecord(
                    obs_index=obs_index,
                    segment_index=seg.segment_index,
                    class_label=seg.location_type,
                    location_id=seg.location_id,
                    device_id=seg.device_id,
                    series=seg.series,
                )
            )
    return tuple(records)


@dataclass(frozen=True)
class Fold:
    """Disjoint train/test index sets into a segment table."""

    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    key: str


def folds_all_places(
    dataset: Dataset,
    window: int = DEFAULT_WINDOW,
    seed: int = 0,
    iterations: int = ALL_PLACES_ITERATIONS,
) -> list[Fold]:
    """Per iteration and observation: 3 random test segments, 7 train."""
    table = build_segment_table(dataset, window)
    by_obs: dict[int, list[int]] = {}
    for idx, rec in enumerate(table):
        by_obs.setdefault(rec.obs_index, []).append(idx)
    need = ALL_PLACES_TEST_SEGMENTS + ALL_PLACES_TRAIN_SEGMENTS
    for obs_index, ids in by_obs.items():
        if len(ids) < need:
            obs = dataset.observations[obs_index]
            raise InvalidWindowError(
                f"observation {obs.device_id}@{obs.location_id} yields "
                f"{len(ids)} segments; the all-places protocol needs {need}"
            )
    folds: list[Fold] = []
    for iteration in range(iterations):
        train: list[int] = []
        test: list[int] = []
        for obs_index in sorted(by_obs):
            rng = np.random.default_rng((seed, 17, iteration, obs_index))
            perm = rng.permutation(by_obs[obs_index])
            test.extend(int(i) for i in perm[:ALL_PLACES_TEST_SEGMENTS])
            train.extend(int(i) for i in perm[ALL_PLACES_TEST_SEGMENTS:need])
        folds.append(Fold(tuple(train), tuple(test), key=f"iter{iteration:02d}"))
    return folds


def folds_leave_place_out(
    dataset: Dataset, window: int = DEFAULT_WINDOW
) -> list[Fold]:
    """One fold per location: its segments (all devices) form the test set."""
    per_class: dict[str, set[str]] = {}
    for obs in dataset.observations:
        per_class.setdefault(obs.location_type, set()).add(obs.location_id)
    for label in sorted(per_class):
        if len(per_class[label]) < 2:
            raise ConfigurationError(
                f"leave-a-place-out needs >= 2 locations per class; "
                f"class {label!r} has {len(per_class[label])}"
            )
    table = build_segment_table(dataset, window)
    folds = []
    for location in dataset.location_ids:
        test = tuple(i for i, r in enumerate(table) if r.location_id == location)
        train = tuple(i for i, r in enumerate(table) if r.location_id != location)
        folds.append(Fold(train, test, key=location))
    return folds


def folds_leave_device_out(
    dataset: Dataset, window: int = DEFAULT_WINDOW
) -> list[Fold]:
    """One fold per device: all of its segments form the test set."""
    if len(dataset.device_ids) < 2:
        raise ConfigurationError("leave-a-device-out needs >= 2 devices")
    table = build_segment_table(dataset, window)
    folds = []
    for device in dataset.device_ids:
        test = tuple(i for i, r in enumerate(table) if r.device_id == device)
        train = tuple(i for i, r in enumerate(table) if r.device_id != device)
        folds.append(Fold(train, test, key=device))
    return folds


def check_leakage(
    fold: Fold, table: Sequence[SegmentRecord], protocol: str
) -> None:
    """Abort on any train/test contamination for the given protocol."""
    train = set(fold.train_indices)
    test = set(fold.test_indices)
    if train & test:
        raise LeakageError(f"fold {fold.key}: train/test segment overlap")
    if not test:
        raise LeakageError(f"fold {fold.key}: empty test set")
    if protocol == "lpo":
        train_keys = {table[i].location_id for i in fold.train_indices}
        test_keys = {table[i].location_id for i in fold.test_indices}
        if train_keys & test_keys:
            raise LeakageError(f"fold {fold.key}: test location present in train")
    elif protocol == "ldo":
        train_keys = {table[i].device_id for i in fold.train_indices}
        test_keys = {table[i].device_id for i in fold.test_indices}
        if train_keys & test_keys:
            raise LeakageError(f"fold {fold.key}: test device present in train")
    else:
        pairs = {(table[i].obs_index, table[i].segment_index) for i in fold.train_indices}
        for i in fold.test_indices:
            if (table[i].obs_index, table[i].segment_index) in pairs:
                raise LeakageError(f"fold {fold.key}: test segment present in train")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Raw counts; rows are true classes in class_set order."""

    counts: np.ndarray
    class_set: tuple[str, ...]

    def row_normalized(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        safe = np.where(sums == 0, 1, sums)
        return self.counts / safe

    def empty_classes(self) -> tuple[str, ...]:
        sums = self.counts.sum(axis=1)
        return tuple(c for c, s in zip(self.class_set, sums) if s == 0)


def confusion(
    preds: Sequence[str], truths: Sequence[str], class_set: Sequence[str]
) -> ConfusionMatrix:
    if len(preds) != len(truths):
        raise ConfigurationError("predictions and truths must align")
    index = {c: i for i, c in enumerate(class_set)}
    counts = np.zeros((len(class_set), len(class_set)), dtype=np.int64)
    for p, t in zip(preds, truths):
        if p not in index or t not in index:
            raise ConfigurationError(f"label outside class set: {p!r}/{t!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts, tuple(class_set))


def balanced_accuracy(matrix: ConfusionMatrix) -> float:
    """Mean of the row-normalized diagonal over non-empty rows."""
    sums = matrix.counts.sum(axis=1)
    present = sums > 0
    if not present.any():
        raise ConfigurationError("confusion matrix has no populated rows")
    diag = np.diag(matrix.counts)[present] / sums[present]
    return float(diag.mean())


@dataclass(frozen=True)
class FoldResult:
    key: str
    segment_records: tuple[tuple[int, int, str, str], ...]  # obs, seg, true, pred
    observation_records: tuple[tuple[int, str, str], ...]  # obs, true, pred


@dataclass(frozen=True)
class EvaluationReport:
    protocol: str
    method: str
    window: int
    seed: int
    class_set: tuple[str, ...]
    fold_results: tuple[FoldResult, ...]
    confusion_observations: ConfusionMatrix
    confusion_segments: ConfusionMatrix
    balanced_accuracy: float
    balanced_accuracy_segments: float
    config: dict


def majority_vote(labels: Sequence[str], class_set: Sequence[str]) -> str:
    """Most frequent label; ties resolve to the lowest class-set index."""
    counts: dict[str, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    top = max(counts.values())
    for c in class_set:
        if counts.get(c, 0) == top:
            return c
    raise ConfigurationError("vote labels outside class set")


def aggregate_fold_results(
    fold_results: Sequence[FoldResult], class_set: Sequence[str]
) -> tuple[ConfusionMatrix, ConfusionMatrix]:
    """(observation-level, segment-level) confusion over all folds."""
    obs_preds = [r[2] for f in fold_results for r in f.observation_records]
    obs_truths = [r[1] for f in fold_results for r in f.observation_records]
    seg_preds = [r[3] for f in fold_results for r in f.segment_records]
    seg_truths = [r[2] for f in fold_results for r in f.segment_records]
    return (
        confusion(obs_preds, obs_truths, class_set),
        confusion(seg_preds, seg_truths, class_set),
    )


def run_protocol(dataset: Dataset, protocol: str, method: str, config) -> EvaluationReport:
    """Fit and score one method under one protocol; see methods.PipelineConfig."""
    from .methods import fit_fold, parse_method

    if protocol not in PROTOCOLS:
        raise ConfigurationError(f"protocol must be one of {PROTOCOLS}")
    spec = parse_method(method, config)
    table = build_segment_table(dataset, config.window)
    if protocol == "all":
        folds = folds_all_places(dataset, config.window, seed=config.seed)
    elif protocol == "lpo":
        folds = folds_leave_place_out(dataset, config.window)
    else:
        folds = folds_leave_device_out(dataset, config.window)

    class_set = dataset.class_set
    fold_results: list[FoldResult] = []
    for fold_index, fold in enumerate(folds):
        check_leakage(fold, table, protocol)
        train_records = [table[i] for i in fold.train_indices]
        test_records = [table[i] for i in fold.test_indices]
        fitted = fit_fold(train_records, spec, config, fold_index)
        preds = fitted.predict_labels(test_records)
        segment_records = tuple(
            (r.obs_index, r.segment_index, r.class_label, p)
            for r, p in zip(test_records, preds)
        )
        by_obs: dict[int, list[str]] = {}
        truth: dict[int, str] = {}
        for r, p in zip(test_records, preds):
            by_obs.setdefault(r.obs_index, []).append(p)
            truth[r.obs_index] = r.class_label
        observation_records = tuple(
            (obs, truth[obs], majority_vote(votes, class_set))
            for obs, votes in sorted(by_obs.items())
        )
        fold_results.append(FoldResult(fold.key, segment_records, observation_records))

    conf_obs, conf_seg = aggregate_fold_results(fold_results, class_set)
    return EvaluationReport(
        protocol=protocol,
        method=method,
        window=config.window,
        seed=config.seed,
        class_set=class_set,
        fold_results=tuple(fold_results),
        confusion_observations=conf_obs,
        confusion_segments=conf_seg,
        balanced_accuracy=balanced_accuracy(conf_obs),
        balanced_accuracy_segments=balanced_accuracy(conf_seg),
        config=config.snapshot(),
    )
