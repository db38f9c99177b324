import json
import struct

import numpy as np
import pytest

from config import PipelineConfig
from errors import UsageError
from evaluation import metrics_from_confusion
from height import FEATURE_NAMES
from main import main, sweep_points
from models import MotionClass

FAST = {
    "sim": {"duration": 12.0},
    "forest_height": {"n_trees": 10},
    "forest_motion": {"n_trees": 10},
    "dictionary": {"atoms": 4, "epochs": 2},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "fast.json").write_text(json.dumps(FAST))
    return root


@pytest.fixture(scope="module")
def height_data(workdir):
    out = workdir / "height_sim"
    assert main(["simulate", "--task", "height", "--subjects", "6", "--seed", "1", "--config", str(workdir / "fast.json"), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def motion_data(workdir):
    out = workdir / "motion_sim"
    assert main(["simulate", "--task", "motion", "--subjects", "4", "--seed", "2", "--config", str(workdir / "fast.json"), "--out", str(out)]) == 0
    return out


def _logs(data):
    return [str(data / "targets.jsonl"), "--manifest", str(data / "manifest.json")]


class TestSimulateCommand:
    def test_outputs(self, height_data):
        manifest = json.loads((height_data / "manifest.json").read_text())
        assert len(manifest["tracks"]) == 6
        assert all(isinstance(t["label"], float) for t in manifest["tracks"].values())
        scenario = json.loads((height_data / "scenario.json").read_text())
        assert scenario["sim"]["duration"] == 12.0
        assert len(scenario["subjects"]) == 6

    def test_scenario_file(self, workdir):
        scenario = workdir / "scenario.json"
        scenario.write_text(json.dumps({"subjects": [{"height": 1.7, "motion": "skateboard", "speed": 3.0, "subject_id": "k"}]}))
        out = workdir / "from_scenario"
        assert main(["simulate", "--task", "motion", "--scenario", str(scenario), "--config", str(workdir / "fast.json"), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tracks"]["k/r0"]["label"] == "skateboard"


class TestHeightCommands:
    def test_extract_train_predict(self, workdir, height_data):
        features = workdir / "height_features.csv"
        bundle = workdir / "height.bin"
        predictions = workdir / "height_predictions.jsonl"
        fast = ["--config", str(workdir / "fast.json")]

        assert main(["extract", "--task", "height", *_logs(height_data), "--out", str(features), *fast]) == 0
        header = features.read_text().splitlines()[0].split(",")
        assert header[-8:] == list(FEATURE_NAMES)

        assert main(["train", "--task", "height", "--features", str(features), "--out", str(bundle), *fast]) == 0
        assert main(["predict", *_logs(height_data), "--bundle", str(bundle), "--out", str(predictions)]) == 0
        records = [json.loads(line) for line in predictions.read_text().splitlines()]
        assert records
        assert {"height", "boulic", "boulic_flagged", "label", "window"} <= set(records[0])
        assert all(1.3 < r["height"] < 2.2 for r in records)

    def test_evaluate_is_reproducible(self, workdir, height_data):
        runs = []
        for name in ("eval_a", "eval_b"):
            out = workdir / name
            argv = ["evaluate", "--task", "height", *_logs(height_data), "--folds", "3", "--config", str(workdir / "fast.json"), "--out", str(out)]
            assert main(argv) == 0
            runs.append(out)
        for name in ("report.json", "report.txt", "binned_mae.csv", "binned_mae.svg"):
            assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()

        report = json.loads((runs[0] / "report.json").read_text())
        assert report["kind"] == "regression"
        assert "baseline" in report
        assert set(report["importances"]) == set(FEATURE_NAMES)

        rendered = workdir / "rendered"
        assert main(["report", str(runs[0] / "report.json"), "--out", str(rendered)]) == 0
        assert (rendered / "binned_mae.svg").read_bytes() == (runs[0] / "binned_mae.svg").read_bytes()

    def test_sweep(self, workdir, height_data):
        grid = workdir / "grid.json"
        grid.write_text(json.dumps({"window.duration": [2.5, 3.0]}))
        out = workdir / "sweep"
        argv = ["sweep", "--task", "height", *_logs(height_data), "--folds", "3", "--grid", str(grid), "--config", str(workdir / "fast.json"), "--out", str(out)]
        assert main(argv) == 0
        points = json.loads((out / "sweep.json").read_text())["points"]
        assert [p["overrides"] for p in points] == [{"window.duration": 2.5}, {"window.duration": 3.0}]
        assert (out / "point_001" / "report.json").exists()
        assert "window.duration" in (out / "sweep.txt").read_text()

        # a rerun starts a fresh sweep.json
        assert main(argv) == 0
        assert len(json.loads((out / "sweep.json").read_text())["points"]) == 2


class TestMotionCommands:
    def test_evaluate(self, workdir, motion_data):
        out = workdir / "motion_eval"
        argv = ["evaluate", "--task", "motion", *_logs(motion_data), "--folds", "2", "--config", str(workdir / "fast.json"), "--out", str(out)]
        assert main(argv) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["kind"] == "classification"
        assert len(report["confusion"]) == 6
        for row, support in zip(report["row_normalized"], map(sum, report["confusion"])):
            assert sum(row) == pytest.approx(1.0 if support else 0.0, abs=1e-9)
        assert (out / "confusion.svg").exists()

    def test_train_predict_and_grids(self, workdir, motion_data):
        bundle = workdir / "motion.bin"
        predictions = workdir / "motion_predictions.jsonl"
        fast = ["--config", str(workdir / "fast.json")]
        assert main(["train", "--task", "motion", *_logs(motion_data), "--out", str(bundle), *fast]) == 0
        assert main(["predict", str(motion_data / "targets.jsonl"), "--bundle", str(bundle), "--out", str(predictions)]) == 0
        records = [json.loads(line) for line in predictions.read_text().splitlines()]
        assert {"motion", "dictionary_vote", "window"} <= set(records[0])
        assert "label" not in records[0]

        assert main(["predict", *_logs(motion_data), "--bundle", str(bundle), "--out", str(predictions)]) == 0
        records = [json.loads(line) for line in predictions.read_text().splitlines()]
        confusion = np.zeros((len(MotionClass), len(MotionClass)), dtype=np.int64)
        for r in records:
            confusion[MotionClass.from_str(r["label"]), MotionClass.from_str(r["motion"])] += 1
        assert metrics_from_confusion(confusion).macro_f1 >= 0.95

        grids = workdir / "grids"
        features = workdir / "motion_features.csv"
        assert main(["extract", "--task", "motion", *_logs(motion_data), "--out", str(features), "--dump-grids", str(grids), *fast]) == 0
        pgm = sorted(grids.glob("*.pgm"))
        assert pgm
        assert pgm[0].read_bytes().startswith(b"P5\n64 20\n255\n")


class TestExitCodes:
    def test_config_prints_defaults(self, capsys):
        assert main(["config"]) == 0
        assert PipelineConfig.from_dict(json.loads(capsys.readouterr().out)) == PipelineConfig()

    def test_usage_error(self):
        assert main(["fly"]) == 1

    def test_missing_log(self, tmp_path):
        assert main(["extract", "--task", "height", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "f.csv")]) == 2

    def test_strict_mode(self, tmp_path):
        log = tmp_path / "log.jsonl"
        log.write_text('{"t": 0, "track": "a", "x": 0, "y": 0, "v": 1}\n{broken\n')
        assert main(["extract", "--task", "height", str(log), "--strict", "--out", str(tmp_path / "f.csv")]) == 2

    def test_bundle_version_mismatch(self, workdir, height_data, tmp_path):
        bundle = workdir / "height.bin"
        if not bundle.exists():
            assert main(["train", "--task", "height", *_logs(height_data), "--config", str(workdir / "fast.json"), "--out", str(bundle)]) == 0
        raw = bytearray(bundle.read_bytes())
        raw[4:6] = struct.pack("<H", 99)
        patched = tmp_path / "future.bin"
        patched.write_bytes(bytes(raw))
        assert main(["predict", *_logs(height_data), "--bundle", str(patched), "--out", str(tmp_path / "p.jsonl")]) == 3


    def test_bundle_with_empty_header(self, height_data, tmp_path):
        bundle = tmp_path / "empty.bin"
        bundle.write_bytes(struct.pack("<4sHI", b"GRDM", 1, 2) + b"{}")
        assert main(["predict", *_logs(height_data), "--bundle", str(bundle), "--out", str(tmp_path / "p.jsonl")]) == 3


class TestSweepPoints:
    def test_cartesian_product(self):
        points = sweep_points({"b": [1, 2], "a": ["x"]})
        assert points == [{"a": "x", "b": 1}, {"a": "x", "b": 2}]

    @pytest.mark.parametrize("grid", [{"a": []}, {"a": 3}])
    def test_bad_grid(self, grid):
        with pytest.raises(UsageError):
            sweep_points(grid)
