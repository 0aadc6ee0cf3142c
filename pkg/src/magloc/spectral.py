"""Discrete Fourier machinery backing frequency-domain descriptors and GCC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError

WINDOW_FUNCTIONS = ("rectangular", "hann")


@dataclass(frozen=True)
class Spectrum:
    """Two-sided complex DFT of a real series.

    Bin k corresponds to frequency k * sample_rate / n; only bins up to n/2
    carry independent information for real input.
    """

    bins: np.ndarray
    sample_rate: float
    n: int

    def frequencies(self) -> np.ndarray:
        return np.arange(self.n) * (self.sample_rate / self.n)


def _taper(x: np.ndarray, window: str) -> np.ndarray:
    if window == "rectangular":
        return x
    if window == "hann":
        return x * np.hanning(x.size)
    raise ConfigurationError(f"unknown window function {window!r}")


def dft(x, sample_rate: float = 1.0, window: str = "rectangular") -> Spectrum:
    """Exact discrete Fourier transform of a real series (computed via FFT)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DegenerateInputError("dft needs a 1-D series of length >= 2")
    bins = np.fft.fft(_taper(x, window))
    return Spectrum(bins=bins, sample_rate=float(sample_rate), n=x.size)


def inverse_dft(spec: Spectrum) -> np.ndarray:
    """Real series whose DFT is the given spectrum."""
    return np.fft.ifft(spec.bins).real


def power_spectrum(
    x, sample_rate: float = 1.0, window: str = "rectangular"
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided (frequency, power) pairs with power = |X_k|^2 / n.

    Bins run k = 0..floor(n/2); the full two-sided power (needed for an exact
    Parseval identity) is available from dft() directly.
    """
    spec = dft(x, sample_rate=sample_rate, window=window)
    half = spec.n // 2
    bins = spec.bins[: half + 1]
    freqs = np.arange(half + 1) * (spec.sample_rate / spec.n)
    power = (bins.real * bins.real + bins.imag * bins.imag) / spec.n
    return freqs, power
