import numpy as np
import pytest

from magloc.errors import ConfigurationError
from magloc.evaluation import build_segment_table, run_protocol
from magloc.methods import (
    PipelineConfig,
    _group_runs,
    fit_fold,
    fold_seed,
    method_names,
    parse_method,
)
from magloc.synth import SynthSpec, generate


@pytest.fixture(scope="module")
def dataset():
    return generate(SynthSpec(classes=2, places_per_class=2, devices=2, seed=6))


class TestParseMethod:
    def test_match_variants(self):
        for name, tag in [
            ("match-dtw", "dtw"),
            ("match-euclid", "euclidean"),
            ("match-cosine", "cosine"),
            ("match-bhatt", "bhattacharyya"),
        ]:
            spec = parse_method(name)
            assert spec.family == "match" and spec.distance_tag == tag

    def test_feature_families(self):
        spec = parse_method("shapelet:gbt")
        assert spec.family == "shapelet" and spec.classifier == "gbt"
        assert parse_method("stats").classifier == "rf"  # default classifier

    def test_siamese(self):
        assert parse_method("siamese-c3").conv_layers == 3
        with pytest.raises(ConfigurationError):
            parse_method("siamese-c5")

    def test_match_takes_no_classifier(self):
        with pytest.raises(ConfigurationError):
            parse_method("match-dtw:rf")

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            parse_method("fourier:rf")

    def test_siamese_frequency_unsupported(self):
        cfg = PipelineConfig(domain="frequency")
        with pytest.raises(ConfigurationError):
            parse_method("siamese-c2", cfg)

    def test_all_listed_methods_parse(self):
        for name in method_names():
            parse_method(name)


def test_fold_seed_stable():
    assert fold_seed(3, 5) == fold_seed(3, 5)
    assert fold_seed(3, 5) != fold_seed(3, 6)
    assert fold_seed(4, 5) != fold_seed(3, 5)


def test_group_runs_concatenates_consecutive_segments(dataset):
    table = build_segment_table(dataset, 60)
    # drop segment 3 of each observation to force two runs
    records = [r for r in table if r.segment_index != 3]
    groups = _group_runs(records)
    assert set(groups) == set(dataset.class_set)
    for obs_list in groups.values():
        for obs in obs_list:
            assert len(obs.runs) == 2
            assert obs.runs[0].shape[0] == 3 * 60
            assert obs.runs[1].shape[0] == 6 * 60


def test_domain_switch_changes_configs():
    cfg = PipelineConfig(domain="frequency")
    assert cfg.descriptor_for_domain().domain == "frequency"
    assert cfg.shapelet_for_domain().domain == "gcc"
    base = PipelineConfig(domain="time")
    assert base.descriptor_for_domain().domain == "both"
    assert base.shapelet_for_domain().domain == "time"


@pytest.mark.parametrize(
    "method",
    ["match-euclid", "stats:knn", "stats:gbt", "shapelet:rf", "combined:rf"],
)
def test_fit_predict_round(dataset, method):
    table = build_segment_table(dataset, 60)
    train = [r for r in table if r.segment_index > 0]
    test = [r for r in table if r.segment_index == 0]
    fitted = fit_fold(train, parse_method(method), PipelineConfig(seed=0), 0)
    preds = fitted.predict_labels(test)
    assert len(preds) == len(test)
    assert set(preds) <= set(dataset.class_set)


def test_siamese_fold(dataset):
    cfg = PipelineConfig(
        seed=0,
        network=__import__("magloc.siamese", fromlist=["NetworkConfig"]).NetworkConfig(
            epochs=2, pairs_per_epoch=32, batch_size=8
        ),
    )
    table = build_segment_table(dataset, 60)
    train = [r for r in table if r.segment_index > 4]
    test = [r for r in table if r.segment_index <= 1]
    fitted = fit_fold(train, parse_method("siamese-c2"), cfg, 0)
    preds = fitted.predict_labels(test)
    assert len(preds) == len(test)


def test_frequency_domain_protocol_runs(dataset):
    from magloc.shapelets import ShapeletConfig

    cfg = PipelineConfig(
        domain="frequency",
        shapelet=ShapeletConfig(
            length_set=(10,), stride=10, match_epsilon=0.8, cluster_cut=0.3,
            max_entries_per_class=2,
        ),
    )
    report = run_protocol(dataset, "ldo", "shapelet:rf", cfg)
    assert report.config["domain"] == "frequency"
    assert 0.0 <= report.balanced_accuracy <= 1.0
