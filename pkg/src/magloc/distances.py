"""Pairwise series comparison kernels used for matching, clustering, and scoring.

Five kernels: dynamic time warping, Euclidean, cosine, Bhattacharyya (over
shared-range histograms), and a PHAT-weighted generalized cross-correlation
coefficient. All are symmetric; all return 0 for identical inputs up to the
documented epsilon offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .errors import ConfigurationError, DegenerateInputError, DimensionError, InvalidWindowError

DISTANCE_TAGS = ("dtw", "euclidean", "cosine", "bhattacharyya", "gcc")

#: Smoothing added to the Bhattacharyya coefficient before the log.
BHATTACHARYYA_EPS = 1e-12

#: Default histogram resolution for the Bhattacharyya kernel.
DEFAULT_BINS = 16

#: Relative floor applied to the cross-spectrum modulus in PHAT whitening.
GCC_EPS = 1e-12


@dataclass(frozen=True)
class DistanceKind:
    """A distance tag plus its kernel parameters.

    Parameters: ``radius`` (dtw band half-width, samples), ``bins``
    (bhattacharyya histogram bins).
    """

    tag: str
    parameters: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.tag not in DISTANCE_TAGS:
            raise ConfigurationError(f"unknown distance tag {self.tag!r}")
        object.__setattr__(self, "parameters", dict(self.parameters))
        radius = self.parameters.get("radius")
        if radius is not None and radius < 0:
            raise ConfigurationError("dtw radius must be >= 0")
        bins = self.parameters.get("bins")
        if bins is not None and bins < 2:
            raise ConfigurationError("histogram bin count must be >= 2")


def _as_series(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a 1-D series")
    return arr


def euclidean(a, b) -> float:
    """sqrt of the summed squared pointwise differences."""
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 1:
        raise DimensionError("euclidean needs length >= 1")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def cosine_distance(a, b) -> float:
    """1 - cos(angle between the vectors); 0 parallel, 2 anti-parallel."""
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    na = float(np.sqrt(np.dot(a, a)))
    nb = float(np.sqrt(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine distance undefined for zero-norm input")
    value = 1.0 - float(np.dot(a, b)) / (na * nb)
    return min(2.0, max(0.0, value))


@njit(cache=True)
def _dtw_kernel(a: np.ndarray, b: np.ndarray, radius: int) -> float:
    n = a.shape[0]
    m = b.shape[0]
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        for j in range(m + 1):
            cur[j] = np.inf
        if radius < 0:
            lo, hi = 1, m
        else:
            lo = i - radius if i - radius > 1 else 1
            hi = i + radius if i + radius < m else m
        for j in range(lo, hi + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(a[i - 1] - b[j - 1]) + best
        prev, cur = cur, prev
    return prev[m]


def dtw(a, b, radius: int | None = None) -> float:
    """Minimum cumulative |a_i - b_j| cost over monotone endpoint-pinned alignments.

    The classic O(nm) recurrence over insert/delete/match steps; when a band
    radius r is given, cells with |i - j| > r are excluded.
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.size == 0 or b.size == 0:
        raise DegenerateInputError("dtw needs non-empty series")
    if radius is not None:
        if radius < 0:
            raise InvalidWindowError("dtw radius must be >= 0")
        if abs(a.size - b.size) > radius:
            raise InvalidWindowError(
                f"radius {radius} infeasible for lengths {a.size} and {b.size}"
            )
    return float(_dtw_kernel(a, b, -1 if radius is None else int(radius)))


def bhattacharyya(a, b, bins: int = DEFAULT_BINS) -> float:
    """-ln of the Bhattacharyya coefficient between shared-range histograms.

    Both series are binned over [min(a+b), max(a+b)] with equal-width bins and
    normalized to probability mass; the coefficient is smoothed by a fixed
    epsilon so disjoint supports map to -ln(eps) instead of infinity.
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.size == 0 or b.size == 0:
        raise DegenerateInputError("bhattacharyya needs non-empty series")
    if bins < 2:
        raise ConfigurationError("bhattacharyya needs bins >= 2")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        # both series are the same constant: identical delta distributions
        coefficient = 1.0
    else:
        pa, _ = np.histogram(a, bins=bins, range=(lo, hi))
        pb, _ = np.histogram(b, bins=bins, range=(lo, hi))
        p = pa / a.size
        q = pb / b.size
        coefficient = float(np.sum(np.sqrt(p * q)))
    return float(-np.log(coefficient + BHATTACHARYYA_EPS))


def _next_pow2(n: int) -> int:
    size = 1
    while size < n:
        size *= 2
    return size


def gcc_distance(a, b) -> float:
    """1 - peak magnitude of the PHAT-whitened cross-correlation, in [0, 1].

    The cross-spectrum is normalized to unit modulus per bin (with a relative
    floor on the modulus), so the coefficient depends only on phase alignment
    and is exactly invariant under amplitude scaling of either input.
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 4:
        raise DimensionError("gcc_distance needs length >= 4")
    if not np.any(a) or not np.any(b):
        raise DegenerateInputError("gcc_distance undefined for zero-energy input")
    size = _next_pow2(a.size)
    fa = np.fft.fft(a, size)
    fb = np.fft.fft(b, size)
    cross = fa * np.conj(fb)
    mag = np.abs(cross)
    peak = mag.max()
    if peak == 0.0:
        raise DegenerateInputError("gcc_distance undefined: cross-spectrum is zero")
    weights = cross / np.maximum(mag, GCC_EPS * peak)
    corr = np.fft.ifft(weights)
    similarity = min(1.0, float(np.abs(corr).max()))
    return 1.0 - similarity


def distance(a, b, kind: DistanceKind) -> float:
    """Evaluate the kernel selected by ``kind`` on one pair."""
    if kind.tag == "euclidean":
        return euclidean(a, b)
    if kind.tag == "cosine":
        return cosine_distance(a, b)
    if kind.tag == "dtw":
        return dtw(a, b, radius=kind.parameters.get("radius"))
    if kind.tag == "bhattacharyya":
        return bhattacharyya(a, b, bins=kind.parameters.get("bins", DEFAULT_BINS))
    return gcc_distance(a, b)


def _pairwise_euclidean(items: np.ndarray, block: int = 64) -> np.ndarray:
    # blocked broadcasting of the same difference form the scalar kernel uses,
    # so entries equal independent euclidean() calls exactly
    n = items.shape[0]
    out = np.zeros((n, n))
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = items[start:stop, None, :] - items[None, :, :]
        out[start:stop] = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(out, 0.0)
    return out


def _pairwise_gcc(items: np.ndarray) -> np.ndarray:
    """Batched GCC matrix: one FFT per item, then row-chunked cross-spectra."""
    n, length = items.shape
    if length < 4:
        raise DimensionError("gcc_distance needs length >= 4")
    if not np.all(np.any(items, axis=1)):
        raise DegenerateInputError("gcc_distance undefined for zero-energy input")
    size = _next_pow2(length)
    spectra = np.fft.fft(items, size, axis=1)
    out = np.zeros((n, n))
    for i in range(n - 1):
        cross = spectra[i][None, :] * np.conj(spectra[i + 1 :])
        mag = np.abs(cross)
        peak = mag.max(axis=1)
        if np.any(peak == 0.0):
            raise DegenerateInputError("gcc_distance undefined: cross-spectrum is zero")
        weights = cross / np.maximum(mag, GCC_EPS * peak[:, None])
        corr = np.fft.ifft(weights, axis=1)
        similarity = np.minimum(1.0, np.abs(corr).max(axis=1))
        out[i, i + 1 :] = 1.0 - similarity
        out[i + 1 :, i] = out[i, i + 1 :]
    return out


def pairwise_matrix(items: Sequence, kind: DistanceKind) -> np.ndarray:
    """Full symmetric distance matrix with zero diagonal.

    The lower triangle mirrors the upper so the matrix is exactly symmetric
    even for kernels whose floating-point evaluation is only symmetric to
    rounding error.
    """
    series = [_as_series(x, f"items[{i}]") for i, x in enumerate(items)]
    n = len(series)
    if n == 0:
        return np.zeros((0, 0))
    if kind.tag == "euclidean" and len({s.size for s in series}) == 1:
        return _pairwise_euclidean(np.asarray(series))
    if kind.tag == "gcc" and len({s.size for s in series}) == 1 and n > 8:
        return _pairwise_gcc(np.asarray(series))
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                out[i, j] = distance(series[i], series[j], kind)
            except MemoryError:
                raise
            except Exception as exc:
                raise type(exc)(f"pairwise entry ({i}, {j}): {exc}") from exc
            out[j, i] = out[i, j]
    return out
