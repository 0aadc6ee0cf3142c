import numpy as np
import pytest

from magloc.core import Segment
from magloc.errors import (
    ConfigurationError,
    DegenerateSpectrumError,
    SchemaMismatchError,
)
from magloc.features import (
    DESCRIPTOR_NAMES,
    DescriptorConfig,
    FeatureVector,
    amplitude,
    combine,
    energy,
    extract_descriptors,
    median_value,
    spectral_descriptors,
    standardize,
)
from magloc.spectral import power_spectrum


def seg_of(series, label="alpha"):
    series = np.asarray(series, dtype=float)
    return Segment("dev0", "loc0", label, series, 0)


class TestTimeDescriptors:
    def test_constant_segment_formulas(self):
        # median 5, amplitude 0, energy 25 * 60 = 1500 on the 60-sample view
        x = np.full(60, 5.0)
        assert median_value(x) == 5.0
        assert amplitude(x) == 0.0
        assert energy(x) == 1500.0

    def test_constant_segment_raises_on_spectrum(self):
        # the non-DC spectrum of a constant is all zero: centroid undefined
        with pytest.raises(DegenerateSpectrumError):
            extract_descriptors(seg_of(np.full(60, 5.0)), DescriptorConfig(subwindow=60))


def test_pure_tone_spectral_descriptors():
    n = 60
    x = np.cos(2 * np.pi * 4 * np.arange(n) / n)
    fv = extract_descriptors(seg_of(x), DescriptorConfig(subwindow=60, domain="time"))
    by_name = dict(zip(fv.schema, fv.values))
    assert by_name["time_natural_freq"] == pytest.approx(4 / 60)
    assert by_name["time_max_power_freq"] == pytest.approx(4 / 60)
    assert by_name["time_spectral_centroid"] == pytest.approx(4 / 60)


def test_descriptors_match_formula_oracle(rng):
    # recompute each descriptor independently from power_spectrum output
    x = 50.0 + rng.normal(0.0, 2.0, 60)
    cfg = DescriptorConfig(subwindow=15, domain="time")
    fv = extract_descriptors(seg_of(x), cfg)
    rows = []
    for i in range(4):
        w = x[15 * i : 15 * (i + 1)]
        freqs, power = power_spectrum(w)
        q, f = power[1:], freqs[1:]
        centroid = np.sum(f * q) / np.sum(q)
        local = [
            k
            for k in range(q.size)
            if (k == 0 or q[k] >= q[k - 1]) and (k == q.size - 1 or q[k] >= q[k + 1])
        ]
        k_nat = local[0]
        k_max = int(np.argmax(q))
        rows.append(
            [
                np.median(w),
                w.max() - w.min(),
                np.sum(w * w),
                f[k_nat],
                q[k_nat],
                centroid,
                f[k_max],
                q[k_max],
            ]
        )
    expected = np.mean(rows, axis=0)
    np.testing.assert_allclose(fv.values, expected, rtol=1e-9)


def test_translation_covariance(rng):
    # shifting by c moves the median by c, fixes amplitude, changes energy per formula
    cfg = DescriptorConfig(subwindow=15, domain="time")
    for _ in range(20):
        x = 50.0 + rng.normal(0.0, 2.0, 60)
        c = float(rng.uniform(-5, 5))
        base = extract_descriptors(seg_of(x), cfg)
        shifted = extract_descriptors(seg_of(x + c), cfg)
        b = dict(zip(base.schema, base.values))
        s = dict(zip(shifted.schema, shifted.values))
        assert s["time_median"] == pytest.approx(b["time_median"] + c, rel=1e-9)
        assert s["time_amplitude"] == pytest.approx(b["time_amplitude"], rel=1e-9)
        expected_energy = np.mean(
            [
                np.sum((x[15 * i : 15 * (i + 1)] + c) ** 2)
                for i in range(4)
            ]
        )
        assert s["time_energy"] == pytest.approx(expected_energy, rel=1e-9)


def test_both_domains_shape(rng):
    x = 50.0 + rng.normal(0.0, 1.0, 60)
    fv = extract_descriptors(seg_of(x), DescriptorConfig())
    assert len(fv) == 16
    assert fv.schema[:8] == tuple(f"time_{n}" for n in DESCRIPTOR_NAMES)
    assert fv.schema[8:] == tuple(f"freq_{n}" for n in DESCRIPTOR_NAMES)
    assert fv.source == "statistical"
    assert np.isfinite(fv.values).all()


def test_schema_stability(rng):
    cfg = DescriptorConfig()
    a = extract_descriptors(seg_of(50 + rng.normal(size=60)), cfg)
    b = extract_descriptors(seg_of(50 + rng.normal(size=60)), cfg)
    assert a.schema == b.schema


def test_short_segment_rejected():
    with pytest.raises(ConfigurationError):
        extract_descriptors(seg_of(np.ones(20) + np.arange(20)), DescriptorConfig(subwindow=15))


class TestCombine:
    def fv(self, n, source, prefix):
        return FeatureVector(
            np.arange(n, dtype=float), tuple(f"{prefix}{i}" for i in range(n)), source
        )

    def test_concatenation(self):
        a = self.fv(16, "statistical", "s")
        b = self.fv(12, "shapelet", "h")
        c = combine(a, b)
        assert len(c) == 28
        assert c.source == "combined"
        assert c.schema == a.schema + b.schema

    def test_identity_with_empty(self):
        a = self.fv(4, "statistical", "s")
        empty = FeatureVector(np.empty(0), (), "shapelet")
        assert combine(a, empty) is a
        assert combine(empty, a) is a

    def test_fixed_order_stats_before_shapelet(self):
        stats = self.fv(3, "statistical", "s")
        shape = self.fv(2, "shapelet", "h")
        assert combine(shape, stats).schema == stats.schema + shape.schema
        assert combine(stats, shape).schema == stats.schema + shape.schema

    def test_associative_schema(self):
        a = self.fv(2, "statistical", "a")
        b = self.fv(2, "statistical", "b")
        c = self.fv(2, "statistical", "c")
        left = combine(combine(a, b), c)
        right = combine(a, combine(b, c))
        assert left.schema == right.schema
        np.testing.assert_array_equal(left.values, right.values)


class TestStandardize:
    def fvs(self, matrix, source="statistical"):
        schema = tuple(f"f{i}" for i in range(matrix.shape[1]))
        return [FeatureVector(row, schema, source) for row in matrix]

    def test_train_becomes_zero_mean_unit_std(self, rng):
        train = self.fvs(rng.normal(3.0, 2.0, size=(40, 5)))
        out, _, _, _ = standardize(train)
        matrix = np.stack([fv.values for fv in out])
        np.testing.assert_allclose(matrix.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(matrix.std(axis=0), 1.0, rtol=1e-9)

    def test_constant_column_zeros(self, rng):
        matrix = rng.normal(size=(10, 3))
        matrix[:, 1] = 7.0
        out, applied, _, std = standardize(self.fvs(matrix), self.fvs(matrix))
        assert std[1] == 0.0
        assert all(fv.values[1] == 0.0 for fv in out)
        assert all(fv.values[1] == 0.0 for fv in applied)

    def test_heldout_uses_train_stats(self):
        # hand-computed on a 3-vector fixture: mean 2, std sqrt(2/3)
        train = self.fvs(np.array([[1.0], [2.0], [3.0]]))
        held = self.fvs(np.array([[4.0]]))
        _, out, mean, std = standardize(train, held)
        assert mean[0] == 2.0
        assert std[0] == pytest.approx(np.sqrt(2.0 / 3.0), rel=1e-12)
        assert out[0].values[0] == pytest.approx((4.0 - 2.0) / np.sqrt(2.0 / 3.0), rel=1e-12)

    def test_schema_mismatch(self):
        a = self.fvs(np.ones((2, 2)))
        bad = [FeatureVector(np.ones(2), ("x", "y"), "statistical")]
        with pytest.raises(SchemaMismatchError):
            standardize(a, bad)


def test_spectral_descriptors_degenerate():
    with pytest.raises(DegenerateSpectrumError):
        spectral_descriptors(np.array([0.0, 0.25, 0.5]), np.array([9.0, 0.0, 0.0]))
