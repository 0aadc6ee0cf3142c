"""CSV ingestion and versioned JSON persistence for datasets, models, reports.

CSV schema (header required, UTF-8):

    timestamp,device_id,location_id,location_type,bx,by,bz

Timestamps are integer seconds; flux components are microtesla. Rows group
into observations by (device_id, location_id) with contiguous 1 Hz
timestamps; a gap larger than one second splits the recording (warning), and
fragments shorter than one minute are dropped. All JSON artifacts carry a
format name and version and are written atomically (temp file + rename).
Floats serialize with shortest-round-trip repr, so persisted values restore
to the same double-precision bits.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import MIN_OBSERVATION_LENGTH, Dataset, Observation
from .distances import DistanceKind
from .errors import DataFormatError, VersionError
from .evaluation import EvaluationReport
from .learners import ForestConfig, GbtConfig, TrainedModel, Tree
from .shapelets import Shapelet, ShapeletConfig, ShapeletDictionary
from .siamese import Network, NetworkConfig

logger = logging.getLogger(__name__)

CSV_HEADER = ["timestamp", "device_id", "location_id", "location_type", "bx", "by", "bz"]

DICTIONARY_FORMAT = "magloc-dictionary"
MODEL_FORMAT = "magloc-model"
REPORT_FORMAT = "magloc-report"
FORMAT_VERSION = 1


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def emit_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the ingestion schema; ingest(emit(d)) == d."""
    rows: list[str] = [",".join(CSV_HEADER)]
    for obs in dataset.observations:
        for t, (bx, by, bz) in zip(obs.t, obs.b):
            rows.append(
                f"{int(t) + obs.start_time},{obs.device_id},{obs.location_id},"
                f"{obs.location_type},{float(bx)!r},{float(by)!r},{float(bz)!r}"
            )
    write_atomic(path, "\n".join(rows) + "\n")


def ingest(path: str | Path) -> Dataset:
    """Parse and validate a CSV trace file into a Dataset.

    Malformed rows fail with their line number; timestamp gaps split
    observations with a warning; sub-minute fragments are dropped.
    """
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    groups: dict[tuple[str, str], list[tuple[int, float, float, float, str]]] = {}
    order: list[tuple[str, str]] = []
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise DataFormatError(
                f"{path}: header must be {','.join(CSV_HEADER)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataFormatError(f"{path}:{line_no}: expected 7 fields")
            raw_t, device_id, location_id, location_type, *flux = row
            try:
                t = int(raw_t)
                bx, by, bz = (float(v) for v in flux)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from None
            if not all(np.isfinite(v) for v in (bx, by, bz)):
                raise DataFormatError(f"{path}:{line_no}: non-finite flux value")
            key = (device_id, location_id)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((t, bx, by, bz, location_type))

    observations: list[Observation] = []
    for key in order:
        rows = sorted(groups[key], key=lambda r: r[0])
        runs: list[list[tuple[int, float, float, float, str]]] = [[rows[0]]]
        for prev, cur in zip(rows, rows[1:]):
            if cur[0] == prev[0]:
                raise DataFormatError(
                    f"{path}: duplicate timestamp {cur[0]} for {key[0]}@{key[1]}"
                )
            if cur[0] - prev[0] > 1:
                logger.warning(
                    "gap of %d s at t=%d for %s@%s: splitting observation",
                    cur[0] - prev[0], cur[0], key[0], key[1],
                )
                runs.append([])
            runs[-1].append(cur)
        for run in runs:
            if len(run) < MIN_OBSERVATION_LENGTH:
                logger.warning(
                    "dropping %d-sample fragment for %s@%s (< %d samples)",
                    len(run), key[0], key[1], MIN_OBSERVATION_LENGTH,
                )
                continue
            types = {r[4] for r in run}
            if len(types) != 1:
                raise DataFormatError(
                    f"{path}: location {key[1]!r} labeled with multiple types {types}"
                )
            b = np.array([[r[1], r[2], r[3]] for r in run])
            observations.append(
                Observation(
                    device_id=key[0],
                    location_id=key[1],
                    location_type=run[0][4],
                    t=np.arange(len(run), dtype=np.int64),
                    b=b,
                    start_time=run[0][0],
                )
            )
    if not observations:
        raise DataFormatError(f"{path}: no usable observations")
    return Dataset(tuple(observations))


def _check_header(payload: dict, expected_format: str, path: Path) -> None:
    if payload.get("format") != expected_format:
        raise VersionError(
            f"{path}: expected format {expected_format!r}, got {payload.get('format')!r}"
        )
    if payload.get("version") != FORMAT_VERSION:
        raise VersionError(
            f"{path}: unsupported version {payload.get('version')!r} "
            f"(supported: {FORMAT_VERSION})"
        )


def _load_json(path: str | Path, expected_format: str) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: truncated or invalid JSON ({exc})") from exc
    _check_header(payload, expected_format, path)
    return payload


def _shapelet_config_dict(cfg: ShapeletConfig) -> dict:
    return {
        "length_set": list(cfg.length_set),
        "stride": cfg.stride,
        "presence_threshold": cfg.presence_threshold,
        "min_support_count": cfg.min_support_count,
        "match_epsilon": cfg.match_epsilon,
        "cluster_cut": cfg.cluster_cut,
        "cluster_linkage": cfg.cluster_linkage,
        "domain": cfg.domain,
        "max_entries_per_class": cfg.max_entries_per_class,
    }


def _shapelet_config_from(d: dict) -> ShapeletConfig:
    return ShapeletConfig(
        length_set=tuple(d["length_set"]),
        stride=d["stride"],
        presence_threshold=d["presence_threshold"],
        min_support_count=d["min_support_count"],
        match_epsilon=d["match_epsilon"],
        cluster_cut=d["cluster_cut"],
        cluster_linkage=d["cluster_linkage"],
        domain=d["domain"],
        max_entries_per_class=d["max_entries_per_class"],
    )


def save_dictionary(dictionary: ShapeletDictionary, path: str | Path) -> None:
    payload = {
        "format": DICTIONARY_FORMAT,
        "version": FORMAT_VERSION,
        "config": _shapelet_config_dict(dictionary.config),
        "missing_classes": list(dictionary.missing_classes),
        "entries": [
            {
                "pattern": entry.pattern.tolist(),
                "length": entry.length,
                "class_label": entry.class_label,
                "support": entry.support,
                "count": entry.count,
                "domain": entry.domain,
                "location_id": entry.location_id,
                "device_id": entry.device_id,
                "series_index": entry.series_index,
                "offset": entry.offset,
            }
            for entry in dictionary.entries
        ],
    }
    write_atomic(path, _dump_json(payload))


def load_dictionary(path: str | Path) -> ShapeletDictionary:
    payload = _load_json(path, DICTIONARY_FORMAT)
    entries = tuple(
        Shapelet(
            pattern=np.asarray(e["pattern"], dtype=np.float64),
            length=e["length"],
            class_label=e["class_label"],
            support=e["support"],
            count=e["count"],
            domain=e["domain"],
            location_id=e["location_id"],
            device_id=e["device_id"],
            series_index=e["series_index"],
            offset=e["offset"],
        )
        for e in payload["entries"]
    )
    return ShapeletDictionary(
        entries=entries,
        config=_shapelet_config_from(payload["config"]),
        missing_classes=tuple(payload["missing_classes"]),
    )


def _tree_dict(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
        "impurity": tree.impurity.tolist(),
        "n_samples": tree.n_samples.tolist(),
    }


def _tree_from(d: dict) -> Tree:
    return Tree(
        feature=np.asarray(d["feature"], dtype=np.int64),
        threshold=np.asarray(d["threshold"], dtype=np.float64),
        left=np.asarray(d["left"], dtype=np.int64),
        right=np.asarray(d["right"], dtype=np.int64),
        value=np.asarray(d["value"], dtype=np.float64),
        impurity=np.asarray(d["impurity"], dtype=np.float64),
        n_samples=np.asarray(d["n_samples"], dtype=np.int64),
    )


def _network_dict(net: Network) -> dict:
    cfg = net.config
    return {
        "config": {
            "conv_layers": cfg.conv_layers,
            "kernel_width": cfg.kernel_width,
            "pool_width": cfg.pool_width,
            "margin": cfg.margin,
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "pairs_per_epoch": cfg.pairs_per_epoch,
            "embedding_dim": cfg.embedding_dim,
            "seed": cfg.seed,
        },
        "conv_w": [w.tolist() for w in net.conv_w],
        "conv_b": [b.tolist() for b in net.conv_b],
        "fc_w": net.fc_w.tolist(),
        "fc_b": net.fc_b.tolist(),
        "history": list(net.history),
    }


def _network_from(d: dict) -> Network:
    cfg = NetworkConfig(**d["config"])
    return Network(
        config=cfg,
        conv_w=[np.asarray(w, dtype=np.float64) for w in d["conv_w"]],
        conv_b=[np.asarray(b, dtype=np.float64) for b in d["conv_b"]],
        fc_w=np.asarray(d["fc_w"], dtype=np.float64),
        fc_b=np.asarray(d["fc_b"], dtype=np.float64),
        history=list(d["history"]),
    )


def _payload_dict(model: TrainedModel) -> dict:
    p = model.payload
    if model.kind == "knn":
        return {"X": p["X"].tolist(), "y": p["y"].tolist(), "k": p["k"]}
    if model.kind == "random_forest":
        cfg = p["config"]
        return {
            "trees": [_tree_dict(t) for t in p["trees"]],
            "config": {
                "trees": cfg.trees,
                "max_depth": cfg.max_depth,
                "min_leaf": cfg.min_leaf,
                "features_per_split": cfg.features_per_split,
                "seed": cfg.seed,
            },
            "oob_accuracy": p["oob_accuracy"],
        }
    if model.kind == "gbt":
        cfg = p["config"]
        return {
            "init_margin": p["init_margin"].tolist(),
            "rounds": [[_tree_dict(t) for t in rnd] for rnd in p["rounds"]],
            "config": {
                "rounds": cfg.rounds,
                "depth": cfg.depth,
                "learning_rate": cfg.learning_rate,
                "min_leaf": cfg.min_leaf,
                "seed": cfg.seed,
            },
        }
    # full_signal
    kind: DistanceKind = p["distance"]
    return {
        "series": [s.tolist() for s in p["series"]],
        "labels": list(p["labels"]),
        "distance": {"tag": kind.tag, "parameters": dict(kind.parameters)},
    }


def _payload_from(kind: str, d: dict) -> dict:
    if kind == "knn":
        return {
            "X": np.asarray(d["X"], dtype=np.float64),
            "y": np.asarray(d["y"], dtype=np.int64),
            "k": d["k"],
        }
    if kind == "random_forest":
        return {
            "trees": [_tree_from(t) for t in d["trees"]],
            "config": ForestConfig(**d["config"]),
            "oob_accuracy": d["oob_accuracy"],
        }
    if kind == "gbt":
        return {
            "init_margin": np.asarray(d["init_margin"], dtype=np.float64),
            "rounds": [[_tree_from(t) for t in rnd] for rnd in d["rounds"]],
            "config": GbtConfig(**d["config"]),
        }
    return {
        "series": [np.asarray(s, dtype=np.float64) for s in d["series"]],
        "labels": tuple(d["labels"]),
        "distance": DistanceKind(d["distance"]["tag"], d["distance"]["parameters"]),
    }


def save_model(model: TrainedModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "class_set": list(model.class_set),
        "schema": None if model.schema is None else list(model.schema),
        "seed": model.seed,
        "payload": _payload_dict(model),
    }
    write_atomic(path, _dump_json(payload))


def load_model(path: str | Path) -> TrainedModel:
    payload = _load_json(path, MODEL_FORMAT)
    return TrainedModel(
        kind=payload["kind"],
        class_set=tuple(payload["class_set"]),
        schema=None if payload["schema"] is None else tuple(payload["schema"]),
        seed=payload["seed"],
        payload=_payload_from(payload["kind"], payload["payload"]),
    )


def save_network(net: Network, path: str | Path) -> None:
    payload = {"format": MODEL_FORMAT, "version": FORMAT_VERSION, "kind": "siamese"}
    payload["payload"] = _network_dict(net)
    write_atomic(path, _dump_json(payload))


def load_network(path: str | Path) -> Network:
    payload = _load_json(path, MODEL_FORMAT)
    if payload.get("kind") != "siamese":
        raise DataFormatError(f"{path}: not a siamese network file")
    return _network_from(payload["payload"])


def report_dict(report: EvaluationReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "protocol": report.protocol,
        "method": report.method,
        "window": report.window,
        "seed": report.seed,
        "class_set": list(report.class_set),
        "balanced_accuracy": report.balanced_accuracy,
        "balanced_accuracy_segments": report.balanced_accuracy_segments,
        "confusion_observations": report.confusion_observations.counts.tolist(),
        "confusion_segments": report.confusion_segments.counts.tolist(),
        "folds": [
            {
                "key": f.key,
                "segments": [list(r) for r in f.segment_records],
                "observations": [list(r) for r in f.observation_records],
            }
            for f in report.fold_results
        ],
        "config": report.config,
    }


def save_report(report: EvaluationReport, path: str | Path) -> None:
    write_atomic(path, _dump_json(report_dict(report)))


def load_report(path: str | Path) -> dict:
    """Reports load as plain dictionaries (they are rendered, not re-run)."""
    return _load_json(path, REPORT_FORMAT)


def render_confusion(counts: list[list[int]], class_set: list[str]) -> str:
    """Row-normalized confusion table as fixed-width text."""
    counts_arr = np.asarray(counts, dtype=np.float64)
    sums = counts_arr.sum(axis=1, keepdims=True)
    norm = counts_arr / np.where(sums == 0, 1, sums)
    width = max(8, max(len(c) for c in class_set) + 1)
    lines = ["true \\ pred".ljust(width) + "".join(c.rjust(width) for c in class_set)]
    for i, label in enumerate(class_set):
        cells = "".join(f"{norm[i, j]:.3f}".rjust(width) for j in range(len(class_set)))
        lines.append(label.ljust(width) + cells)
    return "\n".join(lines)


def render_report(payload: dict) -> str:
    """Human-readable summary of a persisted report."""
    lines = [
        f"protocol: {payload['protocol']}   method: {payload['method']}   "
        f"seed: {payload['seed']}   window: {payload['window']}",
        f"balanced accuracy (observations): {payload['balanced_accuracy']:.4f}",
        f"balanced accuracy (segments):     {payload['balanced_accuracy_segments']:.4f}",
        f"folds: {len(payload['folds'])}   classes: {', '.join(payload['class_set'])}",
        "",
        "observation-level confusion (row-normalized):",
        render_confusion(payload["confusion_observations"], payload["class_set"]),
    ]
    return "\n".join(lines) + "\n"
