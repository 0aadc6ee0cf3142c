import json

import numpy as np
import pytest

from magloc import io as mio
from magloc.cli import main
from magloc.distances import DistanceKind
from magloc.errors import DataFormatError, VersionError
from magloc.evaluation import run_protocol
from magloc.features import FeatureVector
from magloc.learners import (
    ForestConfig,
    GbtConfig,
    predict,
    train_full_signal,
    train_gbt,
    train_knn,
    train_random_forest,
)
from magloc.methods import PipelineConfig
from magloc.shapelets import ShapeletConfig, extract_dictionary, shapelet_transform
from magloc.siamese import NetworkConfig, forward, init_network
from magloc.synth import SynthSpec, default_spec, generate

from conftest import make_observation


@pytest.fixture(scope="module")
def tiny_dataset():
    return generate(SynthSpec(classes=2, places_per_class=2, devices=2, seed=3))


class TestCsvRoundTrip:
    def test_identity(self, tiny_dataset, tmp_path):
        path = tmp_path / "d.csv"
        mio.emit_csv(tiny_dataset, path)
        assert mio.ingest(path) == tiny_dataset

    def test_single_observation(self, tmp_path, rng):
        obs = make_observation(50 + rng.normal(size=600))
        from magloc.core import Dataset

        path = tmp_path / "one.csv"
        mio.emit_csv(Dataset((obs,)), path)
        back = mio.ingest(path)
        assert len(back) == 1
        assert len(back.observations[0]) == 600

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "timestamp,device_id,location_id,location_type,bx,by,bz\n"
            "0,d,l,t,1.0,2.0,3.0\n"
            "1,d,l,t,oops,2.0,3.0\n"
        )
        with pytest.raises(DataFormatError, match=":3"):
            mio.ingest(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(DataFormatError, match="header"):
            mio.ingest(path)

    def test_gap_splits_observation(self, tmp_path):
        rows = ["timestamp,device_id,location_id,location_type,bx,by,bz"]
        for t in range(70):
            rows.append(f"{t},d,l,t,50.0,0.0,0.0")
        for t in range(100, 170):
            rows.append(f"{t},d,l,t,51.0,0.0,0.0")
        path = tmp_path / "gap.csv"
        path.write_text("\n".join(rows) + "\n")
        ds = mio.ingest(path)
        assert len(ds) == 2
        assert ds.observations[0].start_time == 0
        assert ds.observations[1].start_time == 100

    def test_short_fragment_dropped(self, tmp_path):
        rows = ["timestamp,device_id,location_id,location_type,bx,by,bz"]
        for t in range(70):
            rows.append(f"{t},d,l,t,50.0,0.0,0.0")
        for t in range(100, 110):  # 10-sample fragment
            rows.append(f"{t},d,l,t,51.0,0.0,0.0")
        path = tmp_path / "frag.csv"
        path.write_text("\n".join(rows) + "\n")
        assert len(mio.ingest(path)) == 1


class TestDictionaryPersistence:
    def test_round_trip_bitwise(self, tiny_dataset, tmp_path, rng):
        d = extract_dictionary(tiny_dataset, ShapeletConfig())
        path = tmp_path / "dict.json"
        mio.save_dictionary(d, path)
        loaded = mio.load_dictionary(path)
        assert loaded.schema() == d.schema()
        assert loaded.config == d.config
        series = 50 + rng.normal(size=120)
        np.testing.assert_array_equal(
            shapelet_transform(series, loaded).values,
            shapelet_transform(series, d).values,
        )

    def test_version_guard(self, tiny_dataset, tmp_path):
        d = extract_dictionary(tiny_dataset, ShapeletConfig())
        path = tmp_path / "dict.json"
        mio.save_dictionary(d, path)
        payload = json.loads(path.read_text())
        payload["version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(VersionError):
            mio.load_dictionary(path)

    def test_format_guard(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(VersionError):
            mio.load_dictionary(path)

    def test_truncation_guard(self, tiny_dataset, tmp_path):
        d = extract_dictionary(tiny_dataset, ShapeletConfig())
        path = tmp_path / "dict.json"
        mio.save_dictionary(d, path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(DataFormatError):
            mio.load_dictionary(path)


class TestModelPersistence:
    def fvs(self, rng, n=20, f=4):
        schema = tuple(f"f{i}" for i in range(f))
        return [
            FeatureVector(rng.normal(size=f), schema, "statistical") for _ in range(n)
        ]

    @pytest.mark.parametrize("kind", ["knn", "random_forest", "gbt"])
    def test_predictions_bit_identical(self, tmp_path, rng, kind):
        train = self.fvs(rng)
        labels = [("a", "b")[i % 2] for i in range(len(train))]
        if kind == "knn":
            model = train_knn(train, labels, k=3)
        elif kind == "random_forest":
            model = train_random_forest(train, labels, ForestConfig(trees=10, seed=2))
        else:
            model = train_gbt(train, labels, GbtConfig(rounds=5))
        path = tmp_path / "model.json"
        mio.save_model(model, path)
        loaded = mio.load_model(path)
        for _ in range(20):
            q = FeatureVector(rng.normal(size=4), train[0].schema, "statistical")
            la, pa = predict(model, q)
            lb, pb = predict(loaded, q)
            assert la == lb
            assert pa == pb  # bit-for-bit on the probability map

    def test_full_signal_round_trip(self, tmp_path, rng):
        series = [rng.normal(size=30) for _ in range(6)]
        labels = [("a", "b")[i % 2] for i in range(6)]
        model = train_full_signal(series, labels, DistanceKind("dtw"))
        path = tmp_path / "match.json"
        mio.save_model(model, path)
        loaded = mio.load_model(path)
        from magloc.learners import classify_series

        q = rng.normal(size=30)
        assert classify_series(loaded, q) == classify_series(model, q)

    def test_network_round_trip(self, tmp_path, rng):
        net = init_network(NetworkConfig(conv_layers=3, seed=4))
        path = tmp_path / "net.json"
        mio.save_network(net, path)
        loaded = mio.load_network(path)
        x = 50 + rng.normal(size=60)
        np.testing.assert_array_equal(forward(net, x), forward(loaded, x))


class TestReportPersistence:
    def test_save_load_render(self, tiny_dataset, tmp_path):
        cfg = PipelineConfig(seed=5)
        report = run_protocol(tiny_dataset, "ldo", "match-euclid", cfg)
        path = tmp_path / "report.json"
        mio.save_report(report, path)
        payload = mio.load_report(path)
        assert payload["balanced_accuracy"] == report.balanced_accuracy
        text = mio.render_report(payload)
        assert "balanced accuracy" in text
        assert report.method in text


class TestCli:
    def test_synth_then_ingest(self, tmp_path, capsys):
        out = tmp_path / "synth"
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"synth": {"classes": 2, "places_per_class": 2, "devices": 2}}))
        assert main(["synth", "--out", str(out), "--seed", "4", "--config", str(config)]) == 0
        assert main(["ingest", str(out / "dataset.csv")]) == 0
        captured = capsys.readouterr().out
        assert "8 observations" in captured

    def test_evaluate_deterministic_bytes(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(
            json.dumps({"synth": {"classes": 2, "places_per_class": 2, "devices": 2}})
        )
        args = [
            "evaluate", "--method", "match-euclid", "--protocol", "ldo",
            "--seed", "7", "--config", str(config),
        ]
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        assert (out1 / "confusion.txt").read_bytes() == (out2 / "confusion.txt").read_bytes()

    def test_report_command(self, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(
            json.dumps({"synth": {"classes": 2, "places_per_class": 2, "devices": 2}})
        )
        out = tmp_path / "run"
        assert main([
            "evaluate", "--method", "match-euclid", "--protocol", "ldo",
            "--seed", "1", "--config", str(config), "--out", str(out),
        ]) == 0
        capsys.readouterr()
        assert main(["report", str(out / "report.json")]) == 0
        rendered = capsys.readouterr().out
        assert "match-euclid" in rendered

    def test_unsupported_combination_exit_2(self, tmp_path):
        assert main([
            "evaluate", "--method", "siamese-c2", "--domain", "frequency",
            "--out", str(tmp_path), "--seed", "0",
        ]) == 2

    def test_unknown_method_exit_2(self, tmp_path):
        assert main([
            "evaluate", "--method", "wavelets:rf", "--out", str(tmp_path),
        ]) == 2

    def test_missing_data_exit_3(self, tmp_path):
        assert main(["ingest", str(tmp_path / "nope.csv")]) == 3

    def test_train_writes_artifacts(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(
            json.dumps(
                {
                    "synth": {"classes": 2, "places_per_class": 2, "devices": 2},
                    "shapelet": {"max_entries_per_class": 2},
                }
            )
        )
        out = tmp_path / "trained"
        assert main([
            "train", "--method", "shapelet:rf", "--seed", "2",
            "--config", str(config), "--out", str(out),
        ]) == 0
        assert (out / "model.json").exists()
        assert (out / "dictionary.json").exists()
        loaded = mio.load_dictionary(out / "dictionary.json")
        assert len(loaded) >= 1
