"""Command-line surface: synth, ingest, train, evaluate, report.

Exit codes: 0 success, 2 configuration problem, 3 data problem, 4 numeric
failure. Every evaluate run embeds its full configuration and seed in the
emitted report, so a run is reproducible from the report alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .core import validate_dataset
from .errors import (
    ConfigurationError,
    DataFormatError,
    DegenerateInputError,
    DegenerateSpectrumError,
    MaglocError,
    TrainingDivergedError,
    VersionError,
)
from .evaluation import run_protocol
from .features import DescriptorConfig
from .learners import ForestConfig, GbtConfig
from .methods import PipelineConfig, method_names, parse_method
from .shapelets import ShapeletConfig, extract_dictionary
from .siamese import NetworkConfig
from .synth import SynthSpec, default_spec, generate
from . import io as mio

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magloc",
        description="Location-type inference from magnetometer traces.",
    )
    parser.add_argument("--version", action="version", version=f"magloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--config", help="JSON config file (synth section)")

    ingest = sub.add_parser("ingest", help="validate a trace CSV and summarize it")
    ingest.add_argument("data", help="input CSV path")
    ingest.add_argument("--out", help="optional directory for a normalized copy")

    train = sub.add_parser("train", help="fit a model on a full dataset and save it")
    _add_run_arguments(train)
    train.add_argument("--data", help="input CSV (defaults to a synthetic dataset)")
    train.add_argument("--out", required=True, help="output directory")

    evaluate = sub.add_parser("evaluate", help="run an evaluation protocol")
    _add_run_arguments(evaluate)
    evaluate.add_argument("--data", help="input CSV (defaults to a synthetic dataset)")
    evaluate.add_argument(
        "--protocol", choices=("all", "lpo", "ldo"), default="lpo"
    )
    evaluate.add_argument("--out", required=True, help="output directory")

    report = sub.add_parser("report", help="render a saved evaluation report")
    report.add_argument("report", help="report JSON path")
    report.add_argument("--out", help="optional directory for rendered text")
    return parser


def _add_run_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default="shapelet:rf", help=f"one of {method_names()}")
    p.add_argument("--domain", choices=("time", "frequency"), default="time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config file overriding defaults")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"bad JSON in config {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return payload


def _dataclass_from(cls, overrides: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    bad = set(overrides) - known
    if bad:
        raise ConfigurationError(f"unknown {where} option(s): {sorted(bad)}")
    if "length_set" in overrides:
        overrides = dict(overrides, length_set=tuple(overrides["length_set"]))
    if "motifs" in overrides:
        from .synth import MotifSpec

        overrides = dict(
            overrides, motifs=tuple(MotifSpec(**m) for m in overrides["motifs"])
        )
    for key in ("device_gain", "device_offset", "baseline_range", "occurrences"):
        if key in overrides and isinstance(overrides[key], list):
            overrides = dict(overrides, **{key: tuple(overrides[key])})
    return cls(**overrides)


def build_synth_spec(config: dict, seed: int) -> SynthSpec:
    section = dict(config.get("synth", {}))
    section.setdefault("seed", seed)
    return _dataclass_from(SynthSpec, section, "synth")


def build_pipeline_config(args, config: dict) -> PipelineConfig:
    return PipelineConfig(
        window=config.get("window", 60),
        domain=args.domain,
        seed=args.seed,
        knn_k=config.get("knn_k", 5),
        embed_k=config.get("embed_k", 1),
        descriptor=_dataclass_from(
            DescriptorConfig, config.get("descriptor", {}), "descriptor"
        ),
        shapelet=_dataclass_from(ShapeletConfig, config.get("shapelet", {}), "shapelet"),
        forest=_dataclass_from(ForestConfig, config.get("forest", {}), "forest"),
        gbt=_dataclass_from(GbtConfig, config.get("gbt", {}), "gbt"),
        network=_dataclass_from(NetworkConfig, config.get("network", {}), "network"),
    )


def _load_dataset(args, config: dict):
    if getattr(args, "data", None):
        return mio.ingest(args.data)
    spec = build_synth_spec(config, args.seed)
    logger.info("no --data given: generating the default synthetic benchmark")
    return generate(spec)


def _cmd_synth(args) -> int:
    config = _load_config_file(args.config)
    spec = build_synth_spec(config, args.seed)
    dataset = generate(spec)
    out = Path(args.out)
    mio.emit_csv(dataset, out / "dataset.csv")
    print(
        f"wrote {out / 'dataset.csv'}: {len(dataset)} observations, "
        f"{len(dataset.class_set)} classes, seed {spec.seed}"
    )
    return EXIT_OK


def _cmd_ingest(args) -> int:
    dataset = mio.ingest(args.data)
    report = validate_dataset(dataset)
    if not report.ok:
        for issue in report.issues:
            print(f"invalid: {issue.kind}: {issue.message}", file=sys.stderr)
        return EXIT_DATA
    print(
        f"{args.data}: {len(dataset)} observations, classes={list(dataset.class_set)}, "
        f"devices={len(dataset.device_ids)}, locations={len(dataset.location_ids)}"
    )
    if args.out:
        mio.emit_csv(dataset, Path(args.out) / "normalized.csv")
        print(f"wrote {Path(args.out) / 'normalized.csv'}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _load_config_file(args.config)
    pipeline = build_pipeline_config(args, config)
    spec = parse_method(args.method, pipeline)
    dataset = _load_dataset(args, config)
    out = Path(args.out)

    from .evaluation import build_segment_table
    from .methods import fit_fold, _FittedFeatureMethod, _FittedMatcher, _FittedSiamese

    table = build_segment_table(dataset, pipeline.window)
    fitted = fit_fold(list(table), spec, pipeline, fold_index=0)
    if spec.family in ("shapelet", "combined"):
        dictionary = extract_dictionary(dataset, pipeline.shapelet_for_domain())
        mio.save_dictionary(dictionary, out / "dictionary.json")
        print(f"wrote {out / 'dictionary.json'} ({len(dictionary)} entries)")
    if isinstance(fitted, _FittedMatcher):
        mio.save_model(fitted.model, out / "model.json")
    elif isinstance(fitted, _FittedFeatureMethod):
        mio.save_model(fitted.model, out / "model.json")
    elif isinstance(fitted, _FittedSiamese):
        mio.save_network(fitted.net, out / "model.json")
    print(f"wrote {out / 'model.json'} (method {args.method})")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    config = _load_config_file(args.config)
    pipeline = build_pipeline_config(args, config)
    parse_method(args.method, pipeline)
    dataset = _load_dataset(args, config)
    report = run_protocol(dataset, args.protocol, args.method, pipeline)
    out = Path(args.out)
    mio.save_report(report, out / "report.json")
    mio.write_atomic(
        out / "confusion.txt",
        mio.render_confusion(
            report.confusion_observations.counts.tolist(), list(report.class_set)
        )
        + "\n",
    )
    print(
        f"{args.method} / {args.protocol}: balanced accuracy "
        f"{report.balanced_accuracy:.4f} over {len(report.fold_results)} folds"
    )
    print(f"wrote {out / 'report.json'} and {out / 'confusion.txt'}")
    return EXIT_OK


def _cmd_report(args) -> int:
    payload = mio.load_report(args.report)
    text = mio.render_report(payload)
    print(text, end="")
    if args.out:
        mio.write_atomic(Path(args.out) / "report.txt", text)
        print(f"wrote {Path(args.out) / 'report.txt'}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, VersionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateInputError, DegenerateSpectrumError, TrainingDivergedError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MaglocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
