"""Statistical descriptors of segments over time- and frequency-domain views.

Eight descriptors per view: median, amplitude, energy, frequency and magnitude
of the natural frequency (lowest non-DC local spectral maximum), spectral
centroid, and frequency and magnitude of maximum power. Descriptors are
computed per sub-window and averaged; the frequency view applies the same
formulas to the segment's one-sided power sequence treated as a series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Segment
from .errors import ConfigurationError, DegenerateSpectrumError, SchemaMismatchError
from .spectral import power_spectrum

SOURCES = ("statistical", "shapelet", "embedding", "combined")

DESCRIPTOR_NAMES = (
    "median",
    "amplitude",
    "energy",
    "natural_freq",
    "natural_freq_magnitude",
    "spectral_centroid",
    "max_power_freq",
    "max_power_magnitude",
)

DOMAINS = ("time", "frequency", "both")


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-length numeric description of one segment."""

    values: np.ndarray
    schema: tuple[str, ...]
    source: str

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "schema", tuple(self.schema))
        if values.shape != (len(self.schema),):
            raise SchemaMismatchError(
                f"{values.shape[0] if values.ndim == 1 else values.shape} values "
                f"vs {len(self.schema)} schema entries"
            )
        if self.source not in SOURCES:
            raise ConfigurationError(f"unknown feature source {self.source!r}")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DescriptorConfig:
    """Sub-window size and domain selection for descriptor extraction."""

    subwindow: int = 15
    domain: str = "both"
    sample_rate: float = 1.0

    def __post_init__(self) -> None:
        if self.subwindow < 2:
            raise ConfigurationError("subwindow must be >= 2 samples")
        if self.domain not in DOMAINS:
            raise ConfigurationError(f"domain must be one of {DOMAINS}")


def median_value(x: np.ndarray) -> float:
    return float(np.median(x))


def amplitude(x: np.ndarray) -> float:
    return float(x.max() - x.min())


def energy(x: np.ndarray) -> float:
    return float(np.sum(x * x))


#: Power bins below this fraction of the strongest bin (DC included) are
#: treated as zero: the FFT of a constant is ~1e-16, not exactly 0.
SPECTRAL_NOISE_FLOOR = 1e-12


def spectral_descriptors(freqs: np.ndarray, power: np.ndarray) -> tuple[float, ...]:
    """(natural freq, its magnitude, centroid, max-power freq, its magnitude).

    DC is excluded throughout so constant offsets cannot dominate. The natural
    frequency is the lowest-frequency local maximum of the non-DC power bins
    (boundary bins qualify against their single inner neighbor). An all-zero
    non-DC spectrum leaves the centroid undefined.
    """
    floor = power.max() * SPECTRAL_NOISE_FLOOR
    q = np.where(power[1:] > floor, power[1:], 0.0)
    f = freqs[1:]
    if q.size == 0 or not np.any(q > 0.0):
        raise DegenerateSpectrumError("non-DC spectrum is all zero")
    left = np.empty_like(q)
    right = np.empty_like(q)
    left[0] = -np.inf
    left[1:] = q[:-1]
    right[-1] = -np.inf
    right[:-1] = q[1:]
    local_max = np.flatnonzero((q > 0.0) & (q >= left) & (q >= right))
    k_nat = int(local_max[0])
    centroid = float(np.sum(f * q) / np.sum(q))
    k_max = int(np.argmax(q))
    return (
        float(f[k_nat]),
        float(q[k_nat]),
        centroid,
        float(f[k_max]),
        float(q[k_max]),
    )


def _descriptors_of(x: np.ndarray, subwindow: int, sample_rate: float) -> np.ndarray:
    """Eight descriptors averaged over non-overlapping sub-windows of ``x``."""
    width = min(subwindow, x.size)
    count = x.size // width
    rows = np.empty((count, len(DESCRIPTOR_NAMES)))
    for i in range(count):
        w = x[i * width : (i + 1) * width]
        freqs, power = power_spectrum(w, sample_rate=sample_rate)
        rows[i] = (median_value(w), amplitude(w), energy(w)) + spectral_descriptors(
            freqs, power
        )
    return rows.mean(axis=0)


def extract_descriptors(seg: Segment, cfg: DescriptorConfig = DescriptorConfig()) -> FeatureVector:
    """Descriptor vector of a segment: 8 values per domain view (16 for both)."""
    x = np.asarray(seg.series, dtype=np.float64)
    if x.size < 2 * cfg.subwindow and x.size != cfg.subwindow:
        raise ConfigurationError(
            f"segment length {x.size} too short for subwindow {cfg.subwindow}"
        )
    values: list[np.ndarray] = []
    schema: list[str] = []
    if cfg.domain in ("time", "both"):
        values.append(_descriptors_of(x, cfg.subwindow, cfg.sample_rate))
        schema.extend(f"time_{name}" for name in DESCRIPTOR_NAMES)
    if cfg.domain in ("frequency", "both"):
        _, power = power_spectrum(x, sample_rate=cfg.sample_rate)
        values.append(_descriptors_of(power, cfg.subwindow, cfg.sample_rate))
        schema.extend(f"freq_{name}" for name in DESCRIPTOR_NAMES)
    return FeatureVector(np.concatenate(values), tuple(schema), "statistical")


def combine(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    """Concatenate two feature vectors into a combined one.

    A statistical part always precedes a shapelet part regardless of argument
    order; any other pairing concatenates in argument order. Combining with an
    empty vector is the identity.
    """
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    first, second = a, b
    if a.source == "shapelet" and b.source == "statistical":
        first, second = b, a
    return FeatureVector(
        np.concatenate([first.values, second.values]),
        first.schema + second.schema,
        "combined",
    )


def standardize(
    train: Sequence[FeatureVector], apply_to: Sequence[FeatureVector] = ()
) -> tuple[list[FeatureVector], list[FeatureVector], np.ndarray, np.ndarray]:
    """Z-score both sets using training statistics only.

    Returns (standardized train, standardized apply_to, mean, stddev). Features
    with zero variance in the training set map to 0 in every output vector.
    """
    if not train:
        raise ConfigurationError("standardize needs a non-empty training set")
    schema = train[0].schema
    for fv in list(train) + list(apply_to):
        if fv.schema != schema:
            raise SchemaMismatchError("all vectors must share the training schema")
    matrix = np.stack([fv.values for fv in train])
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    constant = std == 0.0
    safe = np.where(constant, 1.0, std)

    def transform(fv: FeatureVector) -> FeatureVector:
        z = (fv.values - mean) / safe
        z[constant] = 0.0
        return FeatureVector(z, schema, fv.source)

    return (
        [transform(fv) for fv in train],
        [transform(fv) for fv in apply_to],
        mean,
        std,
    )
