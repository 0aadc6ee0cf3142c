"""Seeded synthetic magnetometer-trace generator with planted per-class events.

Each location-type is characterized by a short motif waveform that recurs in
every trace of that class; places contribute a stable baseline offset, devices
an affine gain/offset distortion, and the sensor adds Gaussian noise. The
generator doubles as ground truth: planted positions are recoverable exactly
for any (spec, dataset) pair it produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset, Observation
from .errors import ConfigurationError, DataFormatError

MOTIF_SHAPES = ("pulse", "ramp", "oscillation")

#: Cycles per motif for the oscillation family.
OSCILLATION_CYCLES = 3

# RNG substream tags; kept distinct so adding streams never shifts existing ones.
_BASELINE, _DEVICE, _TRACE, _DIRECTION = 1, 2, 3, 4


@dataclass(frozen=True)
class MotifSpec:
    """Shape family, duration in samples, and amplitude in microtesla."""

    shape: str
    length: int
    amplitude: float

    def __post_init__(self) -> None:
        if self.shape not in MOTIF_SHAPES:
            raise ConfigurationError(f"unknown motif shape {self.shape!r}")
        if self.length < 4:
            raise ConfigurationError("motif length must be >= 4 samples")

    def waveform(self) -> np.ndarray:
        t = np.arange(self.length, dtype=np.float64)
        if self.shape == "pulse":
            return np.full(self.length, self.amplitude)
        if self.shape == "ramp":
            return self.amplitude * t / (self.length - 1)
        return self.amplitude * np.sin(2.0 * np.pi * OSCILLATION_CYCLES * t / self.length)


DEFAULT_MOTIFS = (
    MotifSpec("pulse", 15, 8.0),
    MotifSpec("ramp", 15, 8.0),
    MotifSpec("oscillation", 16, 8.0),
    MotifSpec("pulse", 30, 8.0),
    MotifSpec("ramp", 30, 8.0),
    MotifSpec("oscillation", 32, 8.0),
)


@dataclass(frozen=True)
class SynthSpec:
    """Layout and physics of a generated dataset.

    ``motifs`` holds one motif per class; when the tuple is shorter than
    ``classes`` it is cycled. ``occurrences`` motifs are planted per trace at
    non-overlapping seeded positions.
    """

    classes: int = 6
    places_per_class: int = 3
    devices: int = 3
    trace_length: int = 600
    motifs: tuple[MotifSpec, ...] = DEFAULT_MOTIFS
    # event rate per trace; a tuple cycles per class so that location types
    # differ in how often their event recurs, not just in its shape. Rates
    # descend as motif length grows, keeping every class at moderate duty.
    occurrences: int | tuple[int, ...] = (10, 9, 8, 7, 6, 5)
    noise_sigma: float = 0.8
    device_gain: tuple[float, float] = (0.9, 1.1)
    device_offset: tuple[float, float] = (-5.0, 5.0)
    baseline_range: tuple[float, float] = (46.0, 54.0)
    distinct_baselines: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.classes, self.places_per_class, self.devices) < 1:
            raise ConfigurationError("classes, places_per_class, devices must be >= 1")
        if isinstance(self.occurrences, int):
            rates: tuple[int, ...] = (self.occurrences,)
        else:
            rates = tuple(self.occurrences)
            object.__setattr__(self, "occurrences", rates)
        if not rates or min(rates) < 0 or self.noise_sigma < 0:
            raise ConfigurationError("occurrences and noise_sigma must be non-negative")
        if not self.motifs:
            raise ConfigurationError("at least one motif spec is required")
        longest = max(m.length for m in self.motifs)
        if longest >= self.trace_length:
            raise ConfigurationError("motif length must be below the trace length")

    def class_labels(self) -> tuple[str, ...]:
        return tuple(f"type{i:02d}" for i in range(self.classes))

    def motif_for(self, class_index: int) -> MotifSpec:
        return self.motifs[class_index % len(self.motifs)]

    def occurrences_for(self, class_index: int) -> int:
        if isinstance(self.occurrences, int):
            return self.occurrences
        return self.occurrences[class_index % len(self.occurrences)]


@dataclass(frozen=True)
class PlantedMotif:
    """One planted occurrence: trace-relative start and motif length."""

    start: int
    length: int


@dataclass(frozen=True)
class OracleTruth:
    """Exact planted positions per observation, indexed like the dataset."""

    spec: SynthSpec
    positions: tuple[tuple[PlantedMotif, ...], ...]
    motif_by_class: dict[str, MotifSpec] = field(default_factory=dict)

    def for_observation(self, index: int) -> tuple[PlantedMotif, ...]:
        return self.positions[index]


def _place_positions(
    rng: np.random.Generator, trace_length: int, motif_length: int, count: int
) -> list[int]:
    """Non-overlapping motif start offsets, rejection-sampled."""
    if count == 0:
        return []
    if count * motif_length > trace_length:
        raise ConfigurationError(
            f"cannot plant {count} motifs of length {motif_length} "
            f"in a {trace_length}-sample trace"
        )
    starts: list[int] = []
    attempts = 0
    while len(starts) < count:
        candidate = int(rng.integers(0, trace_length - motif_length + 1))
        if all(
            candidate + motif_length <= s or s + motif_length <= candidate
            for s in starts
        ):
            starts.append(candidate)
        attempts += 1
        if attempts > 1000 * count:
            raise ConfigurationError("motif placement infeasible for trace length")
    return starts


def generate_with_truth(spec: SynthSpec) -> tuple[Dataset, OracleTruth]:
    """Generate the K*P*D observations and their planted-motif ground truth."""
    labels = spec.class_labels()
    gains = np.empty(spec.devices)
    offsets = np.empty(spec.devices)
    for d in range(spec.devices):
        rng = np.random.default_rng((spec.seed, _DEVICE, d))
        gains[d] = rng.uniform(*spec.device_gain)
        offsets[d] = rng.uniform(*spec.device_offset)

    observations: list[Observation] = []
    positions: list[tuple[PlantedMotif, ...]] = []
    motif_by_class: dict[str, MotifSpec] = {}
    n = spec.trace_length
    t = np.arange(n, dtype=np.int64)

    for c, label in enumerate(labels):
        motif = spec.motif_for(c)
        motif_by_class[label] = motif
        wave = motif.waveform()
        for p in range(spec.places_per_class):
            if spec.distinct_baselines:
                # evenly spaced grid, classes interleaved so no class is a
                # contiguous baseline band
                lo, hi = spec.baseline_range
                total = spec.classes * spec.places_per_class
                rank = p * spec.classes + c
                baseline = lo + (hi - lo) * (rank + 0.5) / total
            else:
                rng_place = np.random.default_rng((spec.seed, _BASELINE, c, p))
                baseline = rng_place.uniform(*spec.baseline_range)
            location_id = f"{label}_p{p}"
            for d in range(spec.devices):
                rng = np.random.default_rng((spec.seed, _TRACE, c, p, d))
                starts = _place_positions(rng, n, motif.length, spec.occurrences_for(c))
                clean = np.full(n, baseline)
                for s in starts:
                    clean[s : s + motif.length] += wave
                measured = gains[d] * clean + offsets[d]
                measured += rng.normal(0.0, spec.noise_sigma, n)
                rng_dir = np.random.default_rng((spec.seed, _DIRECTION, c, p, d))
                direction = rng_dir.normal(size=3)
                direction /= np.sqrt(np.sum(direction * direction))
                b = measured[:, None] * direction[None, :]
                observations.append(
                    Observation(
                        device_id=f"dev{d}",
                        location_id=location_id,
                        location_type=label,
                        t=t,
                        b=b,
                    )
                )
                positions.append(
                    tuple(PlantedMotif(start=s, length=motif.length) for s in starts)
                )

    dataset = Dataset(tuple(observations))
    return dataset, OracleTruth(spec, tuple(positions), motif_by_class)


def generate(spec: SynthSpec) -> Dataset:
    """Generate the dataset only; byte-identical for identical specs."""
    return generate_with_truth(spec)[0]


def oracle_labels(spec: SynthSpec, d: Dataset) -> OracleTruth:
    """Recover planted positions for a dataset produced by generate(spec)."""
    expected, truth = generate_with_truth(spec)
    if expected != d:
        raise DataFormatError("dataset does not match the given generator spec")
    return truth


def default_spec(seed: int = 0) -> SynthSpec:
    """The desk-scale planted-motif benchmark."""
    return SynthSpec(seed=seed)


def noise_spec(seed: int = 0) -> SynthSpec:
    """Pure-noise control: no planted motifs and no place-baseline signal.

    Device distortions stay on, so the only structure left is nuisance; any
    classifier beating chance on this data is leaking.
    """
    return replace(
        default_spec(seed), occurrences=0, baseline_range=(50.0, 50.0)
    )


def separable_spec(seed: int = 0) -> SynthSpec:
    """Per-place distinct stable baselines with near-zero noise.

    Every place gets its own well-separated baseline level, so any method that
    memorizes a known place/device should classify it perfectly; motifs are
    still planted so shapelet features remain meaningful.
    """
    return replace(
        default_spec(seed),
        noise_sigma=0.05,
        device_gain=(1.0, 1.0),
        device_offset=(0.0, 0.0),
        baseline_range=(40.0, 110.0),
        distinct_baselines=True,
    )
