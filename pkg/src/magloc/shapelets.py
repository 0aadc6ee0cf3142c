"""Shapelet dictionary discovery and the shapelet feature transform.

A shapelet is a short z-normalized subsequence that recurs across almost all
training observations of one class. Discovery: slide fixed-length windows over
every training series, cluster them per (class, length) with agglomerative
linkage over a pairwise distance matrix, take cluster medoids, and keep the
medoids whose best sliding-window match lands within the match tolerance in at
least ``presence_threshold`` of the class's observations. The transform then
describes any series by its minimum match distance to each kept shapelet.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .core import Dataset, Segment, validate_dataset
from .distances import GCC_EPS, DistanceKind, pairwise_matrix
from .errors import ConfigurationError, DataFormatError, DimensionError
from .features import FeatureVector

logger = logging.getLogger(__name__)

SHAPELET_DOMAINS = ("time", "gcc")


@dataclass(frozen=True)
class ShapeletConfig:
    """Candidate layout, clustering, and presence-test parameters.

    ``match_epsilon`` is the occurrence tolerance. In the time domain a
    shapelet "occurs" in a series when its best sliding-window z-normalized
    distance is at most ``match_epsilon * sqrt(length)``, which pins one
    correlation level across lengths; in the gcc domain the GCC distance
    (already in [0, 1] and length-free) is compared against ``match_epsilon``
    directly. ``cluster_cut`` scales the same way. A ``min_support_count`` of
    None scales the absolute-count gate to ceil(presence_threshold * class
    size); fixed counts mirror larger collection campaigns.
    """

    length_set: tuple[int, ...] = (10, 20, 30)
    stride: int = 5
    presence_threshold: float = 0.90
    min_support_count: int | None = None
    match_epsilon: float = 0.4
    cluster_cut: float = 0.45
    cluster_linkage: str = "average"
    domain: str = "time"
    # storage budget for on-device transfer; None keeps every survivor
    max_entries_per_class: int | None = 8

    def __post_init__(self) -> None:
        object.__setattr__(self, "length_set", tuple(sorted(set(self.length_set))))
        if not self.length_set or min(self.length_set) < 2:
            raise ConfigurationError("length_set entries must be >= 2")
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if not 0.0 < self.presence_threshold <= 1.0:
            raise ConfigurationError("presence_threshold must lie in (0, 1]")
        if self.max_entries_per_class is not None and self.max_entries_per_class < 1:
            raise ConfigurationError("max_entries_per_class must be >= 1 or None")
        if self.domain not in SHAPELET_DOMAINS:
            raise ConfigurationError(f"domain must be one of {SHAPELET_DOMAINS}")
        if self.cluster_linkage not in ("average", "complete", "single"):
            raise ConfigurationError(f"unsupported linkage {self.cluster_linkage!r}")

    def match_threshold(self, length: int) -> float:
        if self.domain == "gcc":
            return self.match_epsilon
        return self.match_epsilon * math.sqrt(length)

    def cut_value(self, length: int) -> float:
        if self.domain == "gcc":
            return self.cluster_cut
        return self.cluster_cut * math.sqrt(length)

    def cluster_kind(self) -> DistanceKind:
        return DistanceKind("gcc" if self.domain == "gcc" else "euclidean")


@dataclass(frozen=True)
class Candidate:
    """One z-normalized subsequence tagged with its origin."""

    pattern: np.ndarray
    length: int
    class_label: str
    location_id: str
    device_id: str
    series_index: int
    offset: int
    constant: bool
    spectrum: np.ndarray | None = None


@dataclass(frozen=True)
class Cluster:
    member_indices: tuple[int, ...]
    medoid_index: int


@dataclass(frozen=True)
class Shapelet:
    """A kept medoid: the pattern, its class, and its measured support."""

    pattern: np.ndarray
    length: int
    class_label: str
    support: float
    count: int
    domain: str
    location_id: str
    device_id: str
    series_index: int
    offset: int

    def identifier(self) -> str:
        return (
            f"{self.class_label}|L{self.length}"
            f"|{self.location_id}|{self.device_id}|s{self.series_index}@{self.offset}"
        )


@dataclass(frozen=True)
class ShapeletDictionary:
    """Ordered shapelet entries plus the config that produced them."""

    entries: tuple[Shapelet, ...]
    config: ShapeletConfig
    missing_classes: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def schema(self) -> tuple[str, ...]:
        return tuple(s.identifier() for s in self.entries)

    def max_length(self) -> int:
        return max((s.length for s in self.entries), default=0)


@dataclass(frozen=True)
class ObservationSeries:
    """One training observation's contiguous series runs plus its origin."""

    location_id: str
    device_id: str
    runs: tuple[np.ndarray, ...]


#: Extraction input: per class, one ObservationSeries per training observation.
SeriesGroups = Mapping[str, Sequence[ObservationSeries]]


#: Windows whose standard deviation is below this fraction of their mean
#: magnitude count as constant: exact-constant slices of a 50 uT baseline
#: carry rounding noise of ~1e-15, which z-normalization must not amplify.
CONSTANT_EPS = 1e-12


def _constant_mask(sd: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return sd <= CONSTANT_EPS * np.maximum(1.0, np.abs(mu))


def znorm(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Zero-mean unit-variance copy; constant input maps to zeros (flagged)."""
    x = np.asarray(x, dtype=np.float64)
    sd = float(x.std())
    mu = float(x.mean())
    if sd <= CONSTANT_EPS * max(1.0, abs(mu)):
        return np.zeros_like(x), True
    return (x - mu) / sd, False


def _znorm_windows(series: np.ndarray, length: int) -> np.ndarray:
    """All sliding windows of ``series``, each z-normalized (one per row)."""
    windows = sliding_window_view(series, length)
    mu = windows.mean(axis=1, keepdims=True)
    sd = windows.std(axis=1, keepdims=True)
    constant = _constant_mask(sd, mu)
    safe = np.where(constant, 1.0, sd)
    z = (windows - mu) / safe
    return np.where(constant, 0.0, z)


def _gcc_fft(patterns: np.ndarray) -> np.ndarray:
    size = 1
    while size < patterns.shape[-1]:
        size *= 2
    return np.fft.fft(patterns, size, axis=-1)


def _candidates_from_series(
    series: np.ndarray,
    length: int,
    cfg: ShapeletConfig,
    class_label: str,
    location_id: str,
    device_id: str,
    series_index: int,
) -> list[Candidate]:
    n = series.shape[0]
    if length >= n:
        return []
    offsets = np.arange(0, n - length + 1, cfg.stride)
    windows = sliding_window_view(series, length)[offsets]
    mu = windows.mean(axis=1, keepdims=True)
    sd = windows.std(axis=1, keepdims=True)
    constant_rows = _constant_mask(sd, mu)
    constant = constant_rows[:, 0]
    safe = np.where(constant_rows, 1.0, sd)
    patterns = np.where(constant_rows, 0.0, (windows - mu) / safe)
    spectra = _gcc_fft(patterns) if cfg.domain == "gcc" else None
    return [
        Candidate(
            pattern=patterns[i],
            length=length,
            class_label=class_label,
            location_id=location_id,
            device_id=device_id,
            series_index=series_index,
            offset=int(offsets[i]),
            constant=bool(constant[i]),
            spectrum=None if spectra is None else spectra[i],
        )
        for i in range(offsets.shape[0])
    ]


def generate_candidates(
    train: Sequence[Segment], cfg: ShapeletConfig
) -> list[Candidate]:
    """All strided z-normalized subsequences of the training segments.

    Lengths that do not fit below a segment's length are skipped for that
    segment (warning logged once per length).
    """
    if not train:
        raise ConfigurationError("candidate generation needs at least one segment")
    out: list[Candidate] = []
    warned: set[int] = set()
    for index, seg in enumerate(train):
        for length in cfg.length_set:
            if length >= len(seg):
                if length not in warned:
                    logger.warning(
                        "skipping shapelet length %d: segment length is %d",
                        length,
                        len(seg),
                    )
                    warned.add(length)
                continue
            out.extend(
                _candidates_from_series(
                    np.asarray(seg.series, dtype=np.float64),
                    length,
                    cfg,
                    seg.location_type,
                    seg.location_id,
                    seg.device_id,
                    index,
                )
            )
    return out


def _fast_pairwise(cands: list[Candidate], cfg: ShapeletConfig) -> np.ndarray:
    """Distance matrix for extraction-time clustering.

    Same metric as pairwise_matrix; the time domain uses the Gram-expanded
    quadratic form (one matrix product) whose entries agree with the direct
    form to ~1e-13 of the pattern scale.
    """
    if cfg.domain == "gcc":
        return pairwise_matrix([c.pattern for c in cands], cfg.cluster_kind())
    patterns = np.stack([c.pattern for c in cands])
    norms = np.sum(patterns * patterns, axis=1)
    sq = norms[:, None] + norms[None, :] - 2.0 * (patterns @ patterns.T)
    matrix = np.sqrt(np.maximum(sq, 0.0))
    upper = np.triu(matrix, 1)
    return upper + upper.T


def _cut_matrix(matrix: np.ndarray, method: str, cut: float) -> list[Cluster]:
    """Flat clusters of a distance matrix cut at linkage height ``cut``."""
    n = matrix.shape[0]
    if n == 1:
        return [Cluster((0,), 0)]
    tree = linkage(squareform(matrix, checks=False), method=method)
    labels = fcluster(tree, t=cut, criterion="distance")
    groups: dict[int, list[int]] = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(idx)
    clusters: list[Cluster] = []
    for members in sorted(groups.values(), key=lambda m: m[0]):
        idx = np.asarray(members)
        sub = matrix[np.ix_(idx, idx)]
        medoid = int(idx[int(np.argmin(sub.sum(axis=1)))])
        clusters.append(Cluster(tuple(members), medoid))
    return clusters


def cluster_candidates(
    cands: Sequence[Candidate], kind: DistanceKind, cut: float
) -> list[Cluster]:
    """Average-linkage agglomeration of same-length candidates, cut at ``cut``.

    Each cluster reports its medoid: the member with minimum summed distance
    to the rest, ties resolved by candidate order.
    """
    if not cands:
        raise ConfigurationError("clustering needs at least one candidate")
    if len({c.length for c in cands}) != 1:
        raise DimensionError("all candidates in one clustering pass must share a length")
    if len(cands) == 1:
        return [Cluster((0,), 0)]
    matrix = pairwise_matrix([c.pattern for c in cands], kind)
    return _cut_matrix(matrix, "average", cut)


def _best_time_matches(
    series: np.ndarray, patterns: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Best z-normalized window distance per pattern over one series.

    The argmin window is located with the expanded quadratic form (one matrix
    product); the winning distance is then recomputed in the direct
    sqrt-of-squared-differences form so values match a per-window scan.
    Patterns longer than the series score +inf.
    """
    m, length = patterns.shape
    best = np.full(m, np.inf)
    pos = np.full(m, -1, dtype=np.int64)
    if series.shape[0] < length:
        return best, pos
    z = _znorm_windows(series, length)
    zz = np.sum(z * z, axis=1)
    pp = np.sum(patterns * patterns, axis=1)
    sq = zz[:, None] - 2.0 * (z @ patterns.T) + pp[None, :]
    pos = np.argmin(sq, axis=0).astype(np.int64)
    diff = z[pos] - patterns
    best = np.sqrt(np.sum(diff * diff, axis=1))
    return best, pos


def _best_gcc_matches(
    series: np.ndarray, patterns: np.ndarray, spectra: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Best GCC distance per pattern over one series' z-normalized windows.

    Windows whose cross-spectrum with a pattern is identically zero (constant
    windows) count as non-matches at distance 1.
    """
    m, length = patterns.shape
    best = np.full(m, np.inf)
    pos = np.full(m, -1, dtype=np.int64)
    if series.shape[0] < length:
        return best, pos
    z = _znorm_windows(series, length)
    zf = _gcc_fft(z)
    for k in range(m):
        cross = zf * np.conj(spectra[k])
        mag = np.abs(cross)
        peak = mag.max(axis=1)
        dead = peak == 0.0
        peak_safe = np.where(dead, 1.0, peak)
        weights = cross / np.maximum(mag, GCC_EPS * peak_safe[:, None])
        corr = np.fft.ifft(weights, axis=1)
        similarity = np.minimum(1.0, np.abs(corr).max(axis=1))
        dist = 1.0 - similarity
        dist[dead] = 1.0
        pos[k] = int(np.argmin(dist))
        best[k] = float(dist[pos[k]])
    return best, pos


def _best_matches(
    series: np.ndarray, patterns: np.ndarray, spectra: np.ndarray | None, domain: str
) -> tuple[np.ndarray, np.ndarray]:
    if domain == "gcc":
        assert spectra is not None
        return _best_gcc_matches(series, patterns, spectra)
    return _best_time_matches(series, patterns)


def match_support(
    pattern: np.ndarray,
    observations: Sequence[ObservationSeries],
    epsilon: float,
    domain: str = "time",
) -> tuple[float, int]:
    """Fraction and count of observations whose best match is within tolerance."""
    pattern = np.asarray(pattern, dtype=np.float64)
    length = pattern.shape[0]
    threshold = epsilon if domain == "gcc" else epsilon * math.sqrt(length)
    patterns = pattern[None, :]
    spectra = _gcc_fft(patterns) if domain == "gcc" else None
    count = 0
    for obs in observations:
        best = min(
            float(_best_matches(np.asarray(s, dtype=np.float64), patterns, spectra, domain)[0][0])
            for s in obs.runs
        )
        if best <= threshold:
            count += 1
    return count / len(observations), count


@dataclass(frozen=True)
class _Survivor:
    shapelet: Shapelet
    matched: frozenset
    cluster_size: int


def _extract_class_length(
    label: str,
    obs_list: Sequence[ObservationSeries],
    length: int,
    cfg: ShapeletConfig,
    min_count: int,
) -> list[_Survivor]:
    cands: list[Candidate] = []
    series_index = 0
    for obs in obs_list:
        for series in obs.runs:
            cands.extend(
                _candidates_from_series(
                    series, length, cfg, label, obs.location_id, obs.device_id,
                    series_index,
                )
            )
            series_index += 1
    if not cands:
        return []
    matrix = _fast_pairwise(cands, cfg)
    clusters = _cut_matrix(matrix, cfg.cluster_linkage, cfg.cut_value(length))
    medoid_ids = [cl.medoid_index for cl in clusters]
    patterns = np.stack([cands[i].pattern for i in medoid_ids])
    spectra = (
        np.stack([cands[i].spectrum for i in medoid_ids])
        if cfg.domain == "gcc"
        else None
    )
    threshold = cfg.match_threshold(length)
    best = np.full((len(medoid_ids), len(obs_list)), np.inf)
    for j, obs in enumerate(obs_list):
        for series in obs.runs:
            d, _ = _best_matches(series, patterns, spectra, cfg.domain)
            best[:, j] = np.minimum(best[:, j], d)
    matched = best <= threshold
    support = matched.mean(axis=1)
    counts = matched.sum(axis=1)
    survivors: list[_Survivor] = []
    for k, cand_id in enumerate(medoid_ids):
        if support[k] >= cfg.presence_threshold and counts[k] >= min_count:
            cand = cands[cand_id]
            survivors.append(
                _Survivor(
                    Shapelet(
                        pattern=cand.pattern,
                        length=length,
                        class_label=label,
                        support=float(support[k]),
                        count=int(counts[k]),
                        domain=cfg.domain,
                        location_id=cand.location_id,
                        device_id=cand.device_id,
                        series_index=cand.series_index,
                        offset=cand.offset,
                    ),
                    frozenset(np.flatnonzero(matched[k]).tolist()),
                    len(clusters[k].member_indices),
                )
            )
    return survivors


def _prefer_longer(survivors: list[_Survivor]) -> list[_Survivor]:
    """Among entries matching the same observation set, keep the longest."""
    best_length: dict[frozenset, int] = {}
    for s in survivors:
        best_length[s.matched] = max(
            best_length.get(s.matched, 0), s.shapelet.length
        )
    return [s for s in survivors if s.shapelet.length == best_length[s.matched]]


def _apply_budget(survivors: list[_Survivor], budget: int | None) -> list[Shapelet]:
    """Keep the most representative entries: highest support, then longer,
    then larger source cluster."""
    if budget is not None and len(survivors) > budget:
        ranked = sorted(
            survivors,
            key=lambda s: (
                -s.shapelet.support,
                -s.shapelet.length,
                -s.cluster_size,
                s.shapelet.series_index,
                s.shapelet.offset,
            ),
        )
        survivors = ranked[:budget]
    return [s.shapelet for s in survivors]


def extract_from_groups(groups: SeriesGroups, cfg: ShapeletConfig) -> ShapeletDictionary:
    """Dictionary extraction over pre-grouped observation series runs."""
    entries: list[Shapelet] = []
    missing: list[str] = []
    for label in sorted(groups):
        obs_list = groups[label]
        if not obs_list:
            missing.append(label)
            continue
        min_count = (
            cfg.min_support_count
            if cfg.min_support_count is not None
            else math.ceil(cfg.presence_threshold * len(obs_list))
        )
        survivors: list[_Survivor] = []
        for length in cfg.length_set:
            survivors.extend(
                _extract_class_length(label, obs_list, length, cfg, min_count)
            )
        kept = _apply_budget(_prefer_longer(survivors), cfg.max_entries_per_class)
        if not kept:
            missing.append(label)
            logger.warning("no shapelet survived for class %r", label)
            continue
        kept.sort(key=lambda s: (s.length, s.series_index, s.offset))
        entries.extend(kept)
    return ShapeletDictionary(tuple(entries), cfg, tuple(missing))


def extract_dictionary(train: Dataset, cfg: ShapeletConfig) -> ShapeletDictionary:
    """Extract the per-class shapelet dictionary from full training observations."""
    report = validate_dataset(train)
    if not report.ok:
        raise DataFormatError(f"training dataset invalid: {report.issues[0].message}")
    groups: dict[str, list[ObservationSeries]] = {c: [] for c in train.class_set}
    for obs in train.observations:
        groups[obs.location_type].append(
            ObservationSeries(obs.location_id, obs.device_id, (obs.series,))
        )
    return extract_from_groups(groups, cfg)


def shapelet_transform(series, dictionary: ShapeletDictionary) -> FeatureVector:
    """Minimum match distance to each dictionary entry, scaled by entry length.

    Entries longer than the series yield +inf sentinels (and a warning); an
    empty dictionary yields a zero-length vector.
    """
    series = np.asarray(series, dtype=np.float64)
    values = np.empty(len(dictionary.entries))
    if len(dictionary.entries) == 0:
        return FeatureVector(values, (), "shapelet")
    by_length: dict[int, list[int]] = {}
    for idx, entry in enumerate(dictionary.entries):
        by_length.setdefault(entry.length, []).append(idx)
    for length, ids in by_length.items():
        patterns = np.stack([dictionary.entries[i].pattern for i in ids])
        spectra = (
            np.stack([_gcc_fft(dictionary.entries[i].pattern) for i in ids])
            if dictionary.config.domain == "gcc"
            else None
        )
        best, _ = _best_matches(series, patterns, spectra, dictionary.config.domain)
        if not np.isfinite(best).all():
            logger.warning(
                "series of length %d is shorter than shapelet length %d; "
                "emitting +inf sentinels",
                series.shape[0],
                length,
            )
        for k, idx in enumerate(ids):
            values[idx] = best[k] / length
    return FeatureVector(values, dictionary.schema(), "shapelet")


def transform_many(
    series_list: Sequence[np.ndarray], dictionary: ShapeletDictionary
) -> list[FeatureVector]:
    return [shapelet_transform(s, dictionary) for s in series_list]
