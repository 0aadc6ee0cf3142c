"""Domain types for labeled magnetometer traces and their segmentation.

A trace is analyzed through its magnitude series sqrt(bx^2+by^2+bz^2), which
removes the dependence on how the phone was held while keeping the field
strength profile of the environment.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidWindowError

#: Minimum admissible observation length in samples (1 Hz grid).
MIN_OBSERVATION_LENGTH = 60

#: Default segmentation window: one minute of 1 Hz samples.
DEFAULT_WINDOW = 60


@dataclass(frozen=True)
class Sample:
    """One magnetometer reading: time offset in seconds and flux components in microtesla."""

    t: int
    bx: float
    by: float
    bz: float


def magnitude(s: Sample) -> float:
    """Euclidean norm of the flux components, in microtesla."""
    return float(np.sqrt(s.bx * s.bx + s.by * s.by + s.bz * s.bz))


@dataclass(frozen=True, eq=False)
class Observation:
    """A contiguous 1 Hz trace collected by one device at one location.

    ``t`` holds seconds since trace start (0..n-1); ``b`` is the (n, 3) array
    of flux components in microtesla. ``start_time`` preserves the original
    wall-clock offset of the first row so that two fragments of a gap-split
    recording stay distinguishable.
    """

    device_id: str
    location_id: str
    location_type: str
    t: np.ndarray
    b: np.ndarray
    start_time: int = 0

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=np.int64)
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 2 or b.shape[1] != 3:
            raise ValueError("b must be an (n, 3) array of flux components")
        if t.shape != (b.shape[0],):
            raise ValueError("t and b must agree on the number of samples")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "b", b)

    def __len__(self) -> int:
        return self.b.shape[0]

    @cached_property
    def series(self) -> np.ndarray:
        """Magnitude series in microtesla, one value per sample."""
        return np.sqrt((self.b * self.b).sum(axis=1))

    @property
    def samples(self) -> tuple[Sample, ...]:
        return tuple(
            Sample(int(ti), float(bx), float(by), float(bz))
            for ti, (bx, by, bz) in zip(self.t, self.b)
        )

    @classmethod
    def from_samples(
        cls,
        device_id: str,
        location_id: str,
        location_type: str,
        samples: Iterable[Sample],
        start_time: int = 0,
    ) -> "Observation":
        rows = list(samples)
        t = np.array([s.t for s in rows], dtype=np.int64)
        b = np.array([[s.bx, s.by, s.bz] for s in rows], dtype=np.float64)
        return cls(device_id, location_id, location_type, t, b, start_time)

    def key(self) -> tuple[str, str, int]:
        """Identity triple used for duplicate detection."""
        return (self.device_id, self.location_id, self.start_time)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.device_id == other.device_id
            and self.location_id == other.location_id
            and self.location_type == other.location_type
            and self.start_time == other.start_time
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.b, other.b)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of observations with a derived class list."""

    observations: tuple[Observation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "observations", tuple(self.observations))

    @cached_property
    def class_set(self) -> tuple[str, ...]:
        """Distinct location-type labels, lexicographically ordered."""
        return tuple(sorted({o.location_type for o in self.observations}))

    @cached_property
    def location_ids(self) -> tuple[str, ...]:
        return tuple(sorted({o.location_id for o in self.observations}))

    @cached_property
    def device_ids(self) -> tuple[str, ...]:
        return tuple(sorted({o.device_id for o in self.observations}))

    def __len__(self) -> int:
        return len(self.observations)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.observations == other.observations


@dataclass(frozen=True)
class Segment:
    """A fixed-length slice of an observation's magnitude series."""

    device_id: str
    location_id: str
    location_type: str
    series: np.ndarray
    segment_index: int

    def __len__(self) -> int:
        return self.series.shape[0]


def segment(obs: Observation, window: int = DEFAULT_WINDOW) -> tuple[Segment, ...]:
    """Split an observation into consecutive non-overlapping windows.

    The trailing remainder shorter than ``window`` is dropped, so an
    observation of length n yields floor(n / window) segments.
    """
    if window < 2:
        raise InvalidWindowError(f"window must be >= 2 samples, got {window}")
    n = len(obs)
    if window > n:
        raise InvalidWindowError(
            f"window {window} exceeds observation length {n} "
            f"({obs.device_id}@{obs.location_id})"
        )
    count = n // window
    series = obs.series
    return tuple(
        Segment(
            device_id=obs.device_id,
            location_id=obs.location_id,
            location_type=obs.location_type,
            series=series[i * window : (i + 1) * window],
            segment_index=i,
        )
        for i in range(count)
    )


@dataclass(frozen=True)
class Issue:
    """One invariant violation found by validate_dataset."""

    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def kinds(self) -> tuple[str, ...]:
        return tuple(i.kind for i in self.issues)


def validate_dataset(d: Dataset) -> ValidationReport:
    """Report every observation/dataset invariant violation; empty report iff valid."""
    issues: list[Issue] = []
    seen_keys: set[tuple[str, str, int]] = set()
    type_by_location: dict[str, str] = {}

    for idx, obs in enumerate(d.observations):
        tag = f"observation {idx} ({obs.device_id}@{obs.location_id})"
        if not np.isfinite(obs.b).all():
            issues.append(Issue("non_finite", f"{tag}: non-finite flux component"))
        if len(obs) < MIN_OBSERVATION_LENGTH:
            issues.append(
                Issue(
                    "too_short",
                    f"{tag}: {len(obs)} samples < {MIN_OBSERVATION_LENGTH}",
                )
            )
        expected = np.arange(len(obs), dtype=np.int64)
        if not np.array_equal(obs.t, expected):
            issues.append(
                Issue("bad_time_grid", f"{tag}: timestamps not 0..n-1 on the 1 Hz grid")
            )
        key = obs.key()
        if key in seen_keys:
            issues.append(Issue("duplicate_key", f"{tag}: duplicate key {key}"))
        seen_keys.add(key)
        prior = type_by_location.get(obs.location_id)
        if prior is None:
            type_by_location[obs.location_id] = obs.location_type
        elif prior != obs.location_type:
            issues.append(
                Issue(
                    "type_conflict",
                    f"location {obs.location_id!r} labeled both {prior!r} "
                    f"and {obs.location_type!r}",
                )
            )
    return ValidationReport(tuple(issues))


def group_by_class(d: Dataset) -> dict[str, list[Observation]]:
    """Observations per location-type, in dataset order."""
    groups: dict[str, list[Observation]] = {label: [] for label in d.class_set}
    for obs in d.observations:
        groups[obs.location_type].append(obs)
    return groups
