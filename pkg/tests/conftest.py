import numpy as np
import pytest

from magloc.core import Dataset, Observation


def make_observation(
    series,
    device_id="dev0",
    location_id="loc0",
    location_type="alpha",
    direction=(1.0, 0.0, 0.0),
    start_time=0,
):
    """Observation whose magnitude series equals ``series`` exactly."""
    series = np.asarray(series, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.sqrt(np.sum(direction * direction))
    b = series[:, None] * direction[None, :]
    return Observation(
        device_id=device_id,
        location_id=location_id,
        location_type=location_type,
        t=np.arange(series.shape[0], dtype=np.int64),
        b=b,
        start_time=start_time,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    """2 classes x 2 places x 2 devices, 120-sample traces with class motifs."""
    rng = np.random.default_rng(7)
    observations = []
    for c, label in enumerate(["alpha", "beta"]):
        for p in range(2):
            base = 50.0 + 3.0 * (2 * c + p)
            for d in range(2):
                series = base + rng.normal(0.0, 0.3, 120)
                motif = (
                    np.full(10, 6.0)
                    if label == "alpha"
                    else 6.0 * np.sin(2 * np.pi * 3 * np.arange(12) / 12)
                )
                for start in (12, 48, 90):
                    series[start : start + motif.size] += motif
                observations.append(
                    make_observation(
                        series,
                        device_id=f"dev{d}",
                        location_id=f"{label}_p{p}",
                        location_type=label,
                    )
                )
    return Dataset(tuple(observations))
