import numpy as np
import pytest

from magloc.errors import DegenerateInputError
from magloc.spectral import Spectrum, dft, inverse_dft, power_spectrum


def naive_dft(x):
    """O(n^2) defining sum, kept independent of the FFT implementation."""
    x = np.asarray(x, dtype=float)
    n = x.size
    k = np.arange(n)
    out = np.empty(n, dtype=complex)
    for bin_idx in range(n):
        out[bin_idx] = np.sum(x * np.exp(-2j * np.pi * bin_idx * k / n))
    return out


def test_constant_series_is_dc_only():
    spec = dft([3.0, 3.0, 3.0, 3.0])
    assert spec.bins[0] == pytest.approx(12.0)
    assert np.abs(spec.bins[1:]).max() <= 1e-12


def test_single_tone_bins():
    n, k = 8, 2
    x = np.cos(2 * np.pi * k * np.arange(n) / n)
    spec = dft(x)
    mags = np.abs(spec.bins)
    assert mags[2] == pytest.approx(4.0, abs=1e-9)
    assert mags[6] == pytest.approx(4.0, abs=1e-9)
    others = np.delete(mags, [2, 6])
    assert others.max() <= 1e-9


def test_matches_naive_oracle(rng):
    for _ in range(20):
        x = rng.normal(size=16)
        got = dft(x).bins
        want = naive_dft(x)
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


def test_linearity(rng):
    x, y = rng.normal(size=32), rng.normal(size=32)
    a, b = 2.5, -1.25
    combined = dft(a * x + b * y).bins
    separate = a * dft(x).bins + b * dft(y).bins
    np.testing.assert_allclose(combined, separate, rtol=1e-9, atol=1e-9)


def test_parseval(rng):
    for _ in range(20):
        x = rng.normal(size=int(rng.integers(8, 128)))
        spec = dft(x)
        time_energy = np.sum(x * x)
        freq_energy = np.sum(np.abs(spec.bins) ** 2) / spec.n
        assert freq_energy == pytest.approx(time_energy, rel=1e-9)


def test_round_trip(rng):
    x = rng.normal(size=50)
    back = inverse_dft(dft(x))
    np.testing.assert_allclose(back, x, rtol=1e-9, atol=1e-12)


def test_power_spectrum_constant():
    freqs, power = power_spectrum([2.0] * 8)
    assert freqs[0] == 0.0
    assert power[0] == pytest.approx(32.0)  # |16|^2 / 8
    assert power[1:].max() <= 1e-12


def test_power_spectrum_tone_frequency():
    n = 8
    x = np.cos(2 * np.pi * 2 * np.arange(n) / n)
    freqs, power = power_spectrum(x, sample_rate=1.0)
    assert freqs[np.argmax(power[1:]) + 1] == pytest.approx(0.25)


def test_power_matches_parseval_full_spectrum(rng):
    x = rng.normal(size=64)
    spec = dft(x)
    full_power = np.abs(spec.bins) ** 2 / spec.n
    assert np.sum(full_power) == pytest.approx(np.sum(x * x), rel=1e-9)


def test_too_short():
    with pytest.raises(DegenerateInputError):
        dft([1.0])


def test_hann_window_applied(rng):
    x = rng.normal(size=32)
    tapered = dft(x, window="hann").bins
    manual = np.fft.fft(x * np.hanning(32))
    np.testing.assert_allclose(tapered, manual, rtol=1e-12)


def test_spectrum_frequencies():
    spec = Spectrum(bins=np.zeros(10, dtype=complex), sample_rate=2.0, n=10)
    np.testing.assert_allclose(spec.frequencies(), np.arange(10) * 0.2)
