import argparse
import json
from dataclasses import asdict, dataclass, fields, is_dataclass, replace
from enum import Enum, auto
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from errors import UsageError
from forest import ForestConfig
from gait_sim import SimConfig
from gait_spectrum import SpectrumConfig
from motion_features import GridConfig
from sparse_dictionary import DictionaryConfig
from trajectory import FrenetConfig, RansacConfig
from windows import N_MIN


class Task(Enum):
    Height = auto()
    Motion = auto()

    @property
    def key(self) -> str:
        return self.name.lower()

    def is_height(self) -> bool:
        return self.name == "Height"

    def is_motion(self) -> bool:
        return self.name == "Motion"

    @classmethod
    def from_str(cls, value: str) -> "Task":
        match value:
            case "height":
                return cls.Height
            case "motion":
                return cls.Motion
            case _:
                raise UsageError(f"unknown task '{value}', expected 'height' or 'motion'")


@dataclass(frozen=True)
class WindowConfig:
    duration: float = 3.0
    hop: float = 1.0
    n_min: int = N_MIN


_SECTIONS = {
    "window": WindowConfig,
    "ransac": RansacConfig,
    "frenet": FrenetConfig,
    "spectrum": SpectrumConfig,
    "grid": GridConfig,
    "dictionary": DictionaryConfig,
    "forest_height": ForestConfig,
    "forest_motion": ForestConfig,
    "sim": SimConfig,
}


def _section_from_dict(cls, data: Dict[str, Any], name: str):
    if not isinstance(data, dict):
        raise UsageError(f"config section '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown keys in config section '{name}': {', '.join(unknown)}")
    if hasattr(cls, "from_dict"):
        return cls.from_dict(data)
    return cls(**data)


@dataclass(frozen=True)
class PipelineConfig:
    window: WindowConfig = WindowConfig()
    ransac: RansacConfig = RansacConfig()
    frenet: FrenetConfig = FrenetConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    grid: GridConfig = GridConfig()
    dictionary: DictionaryConfig = DictionaryConfig()
    forest_height: ForestConfig = ForestConfig.regression()
    forest_motion: ForestConfig = ForestConfig.classification()
    sim: SimConfig = SimConfig()
    folds: int = 5

    def forest(self, task: Task) -> ForestConfig:
        return self.forest_height if task.is_height() else self.forest_motion

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"folds": self.folds}
        for name in _SECTIONS:
            section = getattr(self, name)
            out[name] = section.to_dict() if hasattr(section, "to_dict") else asdict(section)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        unknown = sorted(set(data) - set(_SECTIONS) - {"folds"})
        if unknown:
            raise UsageError(f"unknown config sections: {', '.join(unknown)}")
        defaults = cls()
        kwargs: Dict[str, Any] = {"folds": int(data.get("folds", defaults.folds))}
        for name, section_cls in _SECTIONS.items():
            if name in data:
                if not isinstance(data[name], dict):
                    raise UsageError(f"config section '{name}' must be an object")
                merged = {**_plain(getattr(defaults, name)), **data[name]}
                kwargs[name] = _section_from_dict(section_cls, merged, name)
        return replace(defaults, **kwargs)

    def with_overrides(self, overrides: Dict[str, Any]) -> "PipelineConfig":
        """applies dotted keys such as {"window.duration": 4.0}"""
        data = self.to_dict()
        for key, value in overrides.items():
            section, _, name = key.partition(".")
            if not name:
                data[section] = value
            elif section not in data or not isinstance(data[section], dict):
                raise UsageError(f"unknown config key '{key}'")
            else:
                data[section][name] = value
        return PipelineConfig.from_dict(data)


def _plain(section) -> Dict[str, Any]:
    if hasattr(section, "to_dict"):
        return section.to_dict()
    return asdict(section) if is_dataclass(section) else dict(section)


def load_config(path: Optional[Path]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file {path} not found")
    except json.JSONDecodeError as e:
        raise UsageError(f"invalid config JSON in {path}: {e}")
    return PipelineConfig.from_dict(data)


class Command(Enum):
    Simulate = auto()
    Extract = auto()
    Train = auto()
    Predict = auto()
    Evaluate = auto()
    Report = auto()
    Sweep = auto()
    Config = auto()

    @classmethod
    def from_str(cls, value: str) -> "Command":
        for command in cls:
            if command.name.lower() == value:
                return command
        raise UsageError(f"unknown subcommand '{value}'")


class _ArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors map to exit status 1"""

    def error(self, message: str):
        self.print_usage()
        raise UsageError(message)


@dataclass
class _CliConfig:
    command: Command
    seed: int
    config: PipelineConfig
    strict: bool
    jobs: int

    task: Optional[Task] = None
    logs: List[Path] | None = None
    manifest: Optional[Path] = None
    bundle: Optional[Path] = None
    out: Optional[Path] = None
    features: Optional[Path] = None
    scenario: Optional[Path] = None
    subjects: int = 0
    dump_grids: Optional[Path] = None
    report: Optional[Path] = None
    grid: Optional[Path] = None

    @staticmethod
    def add_arguments(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--seed", help="Seed for every random choice (default: 0).", type=int, default=0)
        common.add_argument("--config", help="Pipeline configuration JSON file.", type=Path, default=None)
        common.add_argument(
            "--strict",
            help="Fail on the first malformed input record instead of skipping it.",
            action="store_true",
            default=False,
        )
        common.add_argument(
            "-j", "--jobs", help="Number of concurrent window workers (default: 4).", type=int, default=4
        )

        sub = parser.add_subparsers(dest="command", required=True)

        def task_arg(p: argparse.ArgumentParser) -> None:
            p.add_argument("--task", choices=["height", "motion"], required=True, help="Which model to work on.")

        def logs_arg(p: argparse.ArgumentParser, manifest_required: bool) -> None:
            p.add_argument("logs", nargs="+", type=Path, help="Target logs (.jsonl or .csv).")
            p.add_argument(
                "--manifest", type=Path, required=manifest_required, help="Manifest mapping tracks to labels."
            )

        p = sub.add_parser("simulate", parents=[common], help="Write labeled synthetic target logs.")
        p.add_argument("--scenario", type=Path, default=None, help="Scenario JSON with a 'subjects' list.")
        p.add_argument("--task", choices=["height", "motion"], default="height", help="Built-in scenario kind.")
        p.add_argument("--subjects", type=int, default=10, help="Subjects in the built-in scenario (default: 10).")
        p.add_argument("--out", type=Path, required=True, help="Output directory.")

        p = sub.add_parser("extract", parents=[common], help="Write per-window feature tables (CSV).")
        task_arg(p)
        logs_arg(p, manifest_required=False)
        p.add_argument("--out", type=Path, required=True, help="Output CSV file.")
        p.add_argument("--dump-grids", type=Path, default=None, help="Directory for PGM grid images.")

        p = sub.add_parser("train", parents=[common], help="Train a model bundle.")
        task_arg(p)
        p.add_argument("logs", nargs="*", type=Path, help="Target logs (.jsonl or .csv).")
        p.add_argument("--manifest", type=Path, default=None, help="Manifest mapping tracks to labels.")
        p.add_argument("--features", type=Path, default=None, help="Height feature CSV written by 'extract'.")
        p.add_argument("--out", type=Path, required=True, help="Output bundle file.")

        p = sub.add_parser("predict", parents=[common], help="Predict every window of the given logs.")
        logs_arg(p, manifest_required=False)
        p.add_argument("--bundle", type=Path, required=True, help="Model bundle written by 'train'.")
        p.add_argument("--out", type=Path, required=True, help="Output JSONL file.")

        p = sub.add_parser("evaluate", parents=[common], help="Grouped cross-validation on labeled logs.")
        task_arg(p)
        logs_arg(p, manifest_required=True)
        p.add_argument("--folds", type=int, default=None, help="Number of grouped folds (default: from config).")
        p.add_argument("--out", type=Path, required=True, help="Output directory for reports.")

        p = sub.add_parser("report", parents=[common], help="Render CSV/SVG artifacts from a report JSON.")
        p.add_argument("report", type=Path, help="Report JSON written by 'evaluate'.")
        p.add_argument("--out", type=Path, required=True, help="Output directory.")

        p = sub.add_parser("sweep", parents=[common], help="Evaluate over a grid of config overrides.")
        task_arg(p)
        logs_arg(p, manifest_required=True)
        p.add_argument("--folds", type=int, default=None, help="Number of grouped folds (default: from config).")
        p.add_argument("--grid", type=Path, required=True, help='JSON such as {"window.duration": [2, 3, 4]}.')
        p.add_argument("--out", type=Path, required=True, help="Output directory.")

        sub.add_parser("config", parents=[common], help="Print the default configuration.")
        return parser

    @classmethod
    def new_from_args(cls, argv: Optional[Sequence[str]] = None) -> "_CliConfig":
        parser = _ArgumentParser("radargait")
        parser = cls.add_arguments(parser)
        args = parser.parse_args(argv)

        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        task = getattr(args, "task", None)
        config = load_config(args.config)
        if getattr(args, "folds", None) is not None:
            config = replace(config, folds=args.folds)
        return cls(
            command=Command.from_str(args.command),
            seed=args.seed,
            config=config,
            strict=args.strict,
            jobs=args.jobs,
            task=Task.from_str(task) if task else None,
            logs=getattr(args, "logs", None),
            manifest=getattr(args, "manifest", None),
            bundle=getattr(args, "bundle", None),
            out=getattr(args, "out", None),
            features=getattr(args, "features", None),
            scenario=getattr(args, "scenario", None),
            subjects=getattr(args, "subjects", 0),
            dump_grids=getattr(args, "dump_grids", None),
            report=getattr(args, "report", None),
            grid=getattr(args, "grid", None),
        )
