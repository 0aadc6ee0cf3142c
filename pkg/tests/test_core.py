import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magloc.core import (
    Dataset,
    Sample,
    magnitude,
    segment,
    validate_dataset,
)
from magloc.errors import InvalidWindowError

from conftest import make_observation


def test_magnitude_345():
    assert magnitude(Sample(0, 3.0, 4.0, 0.0)) == 5.0


def test_magnitude_zero():
    assert magnitude(Sample(0, 0.0, 0.0, 0.0)) == 0.0


def test_magnitude_ones():
    assert magnitude(Sample(0, 1.0, 1.0, 1.0)) == pytest.approx(np.sqrt(3.0), abs=1e-12)


@given(
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.floats(0, 2 * np.pi),
    st.floats(0, np.pi),
)
@settings(max_examples=100, deadline=None)
def test_magnitude_rotation_invariant(components, yaw, pitch):
    # rotate about z then y; the norm must not move
    bx, by, bz = components
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(pitch), np.sin(pitch)
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rotated = ry @ rz @ np.array([bx, by, bz])
    before = magnitude(Sample(0, bx, by, bz))
    after = magnitude(Sample(0, *rotated))
    assert after == pytest.approx(before, rel=1e-9, abs=1e-9)


def test_series_matches_magnitude(rng):
    obs = make_observation(rng.uniform(10, 60, 80), direction=(0.3, -0.5, 0.8))
    per_sample = np.array([magnitude(s) for s in obs.samples])
    np.testing.assert_allclose(obs.series, per_sample, rtol=1e-9)


def test_segment_counts():
    obs = make_observation(np.arange(600, dtype=float) + 50.0)
    assert len(segment(obs, 60)) == 10
    obs60 = make_observation(np.full(60, 50.0))
    assert len(segment(obs60, 60)) == 1


def test_segment_drops_remainder():
    obs = make_observation(np.full(125, 50.0))
    segs = segment(obs, 60)
    assert len(segs) == 2
    assert all(len(s) == 60 for s in segs)


def test_segment_partition_prefix(rng):
    obs = make_observation(rng.uniform(20, 80, 605))
    segs = segment(obs, 60)
    rebuilt = np.concatenate([s.series for s in segs])
    np.testing.assert_array_equal(rebuilt, obs.series[: 60 * len(segs)])


def test_segment_window_errors():
    obs = make_observation(np.full(60, 50.0))
    with pytest.raises(InvalidWindowError):
        segment(obs, 61)
    with pytest.raises(InvalidWindowError):
        segment(obs, 1)


def test_validate_ok(small_dataset):
    assert validate_dataset(small_dataset).ok


def test_validate_type_conflict():
    a = make_observation(np.full(60, 50.0), location_id="L1", location_type="park")
    b = make_observation(
        np.full(60, 50.0), device_id="dev1", location_id="L1", location_type="gym"
    )
    report = validate_dataset(Dataset((a, b)))
    assert report.kinds().count("type_conflict") == 1


def test_validate_non_finite():
    series = np.full(60, 50.0)
    obs = make_observation(series)
    bad = np.array(obs.b)
    bad[5, 1] = np.nan
    broken = make_observation(series)
    object.__setattr__(broken, "b", bad)
    report = validate_dataset(Dataset((broken,)))
    assert "non_finite" in report.kinds()


def test_validate_duplicate_key():
    a = make_observation(np.full(60, 50.0))
    b = make_observation(np.full(60, 51.0))
    report = validate_dataset(Dataset((a, b)))
    assert "duplicate_key" in report.kinds()


def test_validate_too_short():
    obs = make_observation(np.full(59, 50.0))
    assert "too_short" in validate_dataset(Dataset((obs,))).kinds()


def test_class_set_sorted(small_dataset):
    assert small_dataset.class_set == ("alpha", "beta")
