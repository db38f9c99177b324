import json

import pytest

from config import Command, PipelineConfig, Task, _CliConfig, load_config
from errors import UsageError


class TestTask:
    def test_from_str(self):
        assert Task.from_str("height") is Task.Height
        assert Task.from_str("motion").is_motion()
        assert Task.Height.key == "height"

    def test_unknown(self):
        with pytest.raises(UsageError):
            Task.from_str("speed")


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert (cfg.window.duration, cfg.window.hop) == (3.0, 1.0)
        assert cfg.forest(Task.Height).n_trees == 100
        assert cfg.forest(Task.Motion).max_depth is None
        assert cfg.folds == 5

    def test_json_round_trip(self):
        cfg = PipelineConfig()
        assert PipelineConfig.from_dict(json.loads(cfg.to_json())) == cfg

    def test_partial_sections_keep_defaults(self):
        cfg = PipelineConfig.from_dict({"spectrum": {"sigma": 0.05}, "folds": 3})
        assert cfg.spectrum.sigma == 0.05
        assert cfg.spectrum.pad_to == 4096
        assert cfg.folds == 3

    @pytest.mark.parametrize("data", [{"colour": {}}, {"grid": {"rows": 8, "depth": 2}}, {"grid": [1, 2]}])
    def test_unknown_keys(self, data):
        with pytest.raises(UsageError):
            PipelineConfig.from_dict(data)

    def test_overrides(self):
        cfg = PipelineConfig().with_overrides({"window.duration": 4.0, "dictionary.atoms": 8, "folds": 4})
        assert cfg.window.duration == 4.0
        assert cfg.dictionary.atoms == 8
        assert cfg.folds == 4

    def test_tangential_distance(self):
        assert PipelineConfig().frenet.along == "track"
        assert PipelineConfig().with_overrides({"frenet.along": "measured"}).frenet.along == "measured"
        with pytest.raises(UsageError):
            PipelineConfig().with_overrides({"frenet.along": "sideways"})

    def test_bad_override(self):
        with pytest.raises(UsageError):
            PipelineConfig().with_overrides({"nowhere.x": 1})

    def test_load_config(self, tmp_path):
        assert load_config(None) == PipelineConfig()
        path = tmp_path / "cfg.json"
        path.write_text('{"ransac": {"iterations": 50}}')
        assert load_config(path).ransac.iterations == 50
        path.write_text("{")
        with pytest.raises(UsageError):
            load_config(path)
        with pytest.raises(UsageError):
            load_config(tmp_path / "none.json")


class TestCliConfig:
    def test_evaluate(self, tmp_path):
        cli = _CliConfig.new_from_args(
            ["evaluate", "--task", "motion", "a.jsonl", "b.csv", "--manifest", "m.json", "--out", str(tmp_path), "--folds", "3", "--seed", "9"]
        )
        assert cli.command is Command.Evaluate
        assert cli.task is Task.Motion
        assert [p.name for p in cli.logs] == ["a.jsonl", "b.csv"]
        assert cli.config.folds == 3
        assert cli.seed == 9

    def test_config_command(self):
        cli = _CliConfig.new_from_args(["config"])
        assert cli.command is Command.Config
        assert cli.task is None

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["fly"],
            ["evaluate", "--task", "motion", "a.jsonl", "--out", "x"],
            ["train", "--task", "shape", "--out", "x"],
            ["config", "--jobs", "0"],
        ],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(UsageError):
            _CliConfig.new_from_args(argv)
