import asyncio
import itertools
import json
import logging
import os
import re
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm.asyncio import tqdm

from bundle import ModelBundle, load_bundle, save_bundle
from config import Command, PipelineConfig, Task, _CliConfig
from errors import DataError, GaitError, UsageError
from evaluation import (
    evaluate_classification,
    evaluate_regression,
    group_keys,
    grouped_kfold,
    metrics_from_confusion,
    regression_report,
)
from features import HeightSample, MotionSample, extract, window_label
from gait_sim import SubjectSpec, default_scenario, simulate
from height import FEATURE_NAMES
from ingest import ingest_many, load_manifest, manifest_json, to_jsonl
from models import Error, MotionClass, TargetTable, TargetWindow, TrackInfo
from motion_features import MOMENT_NAMES, write_pgm
from pipeline import BoulicBaseline, HeightPipeline, MotionPipeline
from reports import feature_csv, load_report, read_feature_csv, render_artifacts, report_json, summary, sweep_table
from utils import progress_enabled
from utils.fs import put_json, write_json, write_text
from windows import assemble_windows

logging.basicConfig(
    level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper()),
    format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
logger = logging.getLogger(__name__)

Sample = HeightSample | MotionSample


async def extract_samples(
    windows: Sequence[TargetWindow], cfg: PipelineConfig, seed: int, task: Task, jobs: int
) -> List[Sample]:
    """Per-window feature extraction on a worker pool, returned in window order."""
    semaphore = asyncio.Semaphore(jobs)
    results: List[Any] = [None] * len(windows)
    bar = tqdm(total=len(windows), desc=f"{task.key} features", disable=not progress_enabled(), leave=False)

    async def work(i: int, w: TargetWindow) -> None:
        async with semaphore:
            results[i] = await asyncio.to_thread(extract, w, cfg, seed, task.key)
            bar.update(1)

    async with asyncio.TaskGroup() as tg:
        for i, w in enumerate(windows):
            tg.create_task(work(i, w))
    bar.close()

    samples = []
    for r in results:
        if isinstance(r, Error):
            logger.debug(f"skipped window {r.error}")
            continue
        samples.append(r.value)

    skipped = len(windows) - len(samples)
    if skipped:
        logger.warning(f"skipped {skipped} of {len(windows)} windows without usable features")
    logger.info(f"extracted {task.key} features for {len(samples)} windows")
    return samples


def _has_label(sample: Sample, task: Task) -> bool:
    label = sample.window.label
    return isinstance(label, MotionClass) if task.is_motion() else isinstance(label, float)


def labeled(samples: Sequence[Sample], task: Task) -> Tuple[List[Sample], np.ndarray]:
    kept = [s for s in samples if _has_label(s, task)]
    if len(kept) < len(samples):
        logger.warning(f"{len(samples) - len(kept)} windows carry no {task.key} label, ignored")
    if not kept:
        raise DataError(f"no windows with a {task.key} label; is the manifest missing?")
    return kept, np.array([window_label(s.window) for s in kept])


def load_targets(cli: _CliConfig) -> Tuple[TargetTable, Dict[str, TrackInfo]]:
    if not cli.logs:
        raise UsageError("no target logs given")
    result = ingest_many(cli.logs, strict=cli.strict)
    return result.targets, load_manifest(cli.manifest)


async def samples_for(
    targets: TargetTable, tracks: Dict[str, TrackInfo], cfg: PipelineConfig, cli: _CliConfig, task: Task
) -> List[Sample]:
    wc = cfg.window
    windows = assemble_windows(targets, wc.duration, wc.hop, wc.n_min, tracks)
    if not windows:
        raise DataError("no windows with enough targets in the input")
    return await extract_samples(windows, cfg, cli.seed, task, cli.jobs)


def _window_ids(s: Sample) -> Dict[str, Any]:
    w = s.window
    label = w.label.label if isinstance(w.label, MotionClass) else ("" if w.label is None else repr(w.label))
    return {"window": w.key, "track": w.track_id, "start": repr(w.start), "subject": w.subject_id or "", "label": label}


async def run_simulate(cli: _CliConfig) -> None:
    task = cli.task or Task.Height
    sim_cfg = cli.config.sim
    if cli.scenario:
        try:
            data = json.loads(cli.scenario.read_text(encoding="utf-8"))
            specs = [SubjectSpec.from_dict(s) for s in data["subjects"]]
        except FileNotFoundError:
            raise UsageError(f"scenario {cli.scenario} not found")
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise DataError(f"malformed scenario {cli.scenario}: {e}")
    else:
        specs = default_scenario(task.key, cli.subjects, cli.seed)

    semaphore = asyncio.Semaphore(cli.jobs)

    async def run_one(spec: SubjectSpec):
        async with semaphore:
            return await asyncio.to_thread(simulate, spec, sim_cfg)

    async with asyncio.TaskGroup() as tg:
        tasks = [tg.create_task(run_one(spec)) for spec in specs]
    recordings = [t.result() for t in tasks]

    tracks = {r.spec.track_id: r.track_info(task.key) for r in recordings}
    table = TargetTable.concat([r.targets for r in recordings])
    await write_text(cli.out / "targets.jsonl", to_jsonl(table))
    await write_text(cli.out / "manifest.json", manifest_json(tracks) + "\n")
    await write_json(cli.out / "scenario.json", {"sim": sim_cfg.to_dict(), "subjects": [s.to_dict() for s in specs]})
    logger.info(f"simulated {len(recordings)} recordings, {len(table):,} targets into {cli.out}")


async def run_extract(cli: _CliConfig) -> None:
    targets, tracks = load_targets(cli)
    samples = await samples_for(targets, tracks, cli.config, cli, cli.task)
    if cli.task.is_height():
        names, matrix = FEATURE_NAMES, HeightPipeline.matrix(samples)
    else:
        names = MOMENT_NAMES + tuple(f"hog_{b}" for b in range(cli.config.grid.hog_bins))
        matrix = np.array([s.base_features for s in samples]).reshape(len(samples), len(names))
    await write_text(cli.out, feature_csv([_window_ids(s) for s in samples], names, matrix))
    logger.info(f"wrote {len(samples)} feature rows to {cli.out}")

    if cli.dump_grids:
        if cli.task.is_height():
            logger.warning("--dump-grids only applies to the motion task")
            return
        for s in samples:
            name = re.sub(r"[^A-Za-z0-9_.@-]", "_", s.window.key)
            await asyncio.to_thread(write_pgm, s.grid, cli.dump_grids / f"{name}.pgm")
        logger.info(f"wrote {len(samples)} grids to {cli.dump_grids}")


async def run_train(cli: _CliConfig) -> None:
    cfg, task = cli.config, cli.task
    if task.is_height() and cli.features:
        ids, X = read_feature_csv(cli.features, FEATURE_NAMES)
        keep = [i for i, r in enumerate(ids) if r.get("label")]
        if not keep:
            raise DataError(f"{cli.features}: no labeled rows")
        y = np.array([float(ids[i]["label"]) for i in keep])
        pipeline = HeightPipeline(cfg).fit_matrix(X[keep], y, cli.seed)
        fitted = pipeline.forest.predict(X[keep])
    else:
        if cli.features:
            raise UsageError("--features applies to the height task only")
        targets, tracks = load_targets(cli)
        samples, y = labeled(await samples_for(targets, tracks, cfg, cli, task), task)
        pipeline = HeightPipeline(cfg) if task.is_height() else MotionPipeline(cfg)
        pipeline = await asyncio.to_thread(pipeline.fit, samples, y, cli.seed)
        fitted = pipeline.predict(samples)

    if task.is_height():
        logger.info(f"training MAE {regression_report(y, fitted).mae:.4f} m on {len(y)} windows")
    else:
        confusion = np.zeros((len(MotionClass), len(MotionClass)), dtype=np.int64)
        np.add.at(confusion, (y.astype(np.int64), fitted), 1)
        logger.info(f"training macro-F1 {metrics_from_confusion(confusion).macro_f1:.4f} on {len(y)} windows")

    save_bundle(ModelBundle.from_pipeline(pipeline), cli.out)


async def run_predict(cli: _CliConfig) -> None:
    bundle = load_bundle(cli.bundle)
    pipeline = bundle.to_pipeline()
    task = bundle.task
    targets, tracks = load_targets(cli)
    samples = await samples_for(targets, tracks, bundle.config, cli, task)
    if not samples:
        raise DataError("no window yielded features")

    predictions = await asyncio.to_thread(pipeline.predict, samples)
    votes = pipeline.dictionary_votes(samples) if task.is_motion() else None
    lines = []
    for i, (s, p) in enumerate(zip(samples, predictions)):
        record = {"window": s.window.key, "track": s.window.track_id, "start": s.window.start}
        if task.is_height():
            record |= {"height": float(p), "boulic": s.baseline.h, "boulic_flagged": s.baseline.flagged}
        else:
            record |= {"motion": MotionClass(int(p)).label, "dictionary_vote": votes[i].label}
        if s.window.label is not None:
            record["label"] = s.window.label.label if isinstance(s.window.label, MotionClass) else s.window.label
        lines.append(json.dumps(record, sort_keys=True))
    await write_text(cli.out, "\n".join(lines) + "\n")
    logger.info(f"wrote {len(lines)} {task.key} predictions to {cli.out}")


async def evaluate(
    samples: Sequence[Sample], cfg: PipelineConfig, task: Task, seed: int
):
    samples, y = labeled(samples, task)
    groups = group_keys([s.window for s in samples])
    plan = grouped_kfold(groups, cfg.folds, seed)
    logger.info(f"{task.key}: {len(samples)} windows, {len(set(groups))} groups, {plan.k} folds")

    if task.is_motion():
        return await asyncio.to_thread(
            evaluate_classification, lambda: MotionPipeline(cfg), samples, y, groups, plan, seed
        )
    report = await asyncio.to_thread(evaluate_regression, lambda: HeightPipeline(cfg), samples, y, groups, plan, seed)
    report.baseline = evaluate_regression(BoulicBaseline, samples, y, groups, plan, seed)
    return report


async def write_report(report, out: Path) -> None:
    await write_text(out / "report.json", report_json(report))
    for name, content in render_artifacts(report).items():
        await write_text(out / name, content)


async def run_evaluate(cli: _CliConfig) -> None:
    targets, tracks = load_targets(cli)
    samples = await samples_for(targets, tracks, cli.config, cli, cli.task)
    report = await evaluate(samples, cli.config, cli.task, cli.seed)
    await write_report(report, cli.out)
    logger.info(f"{cli.task.key} evaluation: {summary(report)}")


async def run_report(cli: _CliConfig) -> None:
    report = load_report(cli.report)
    for name, content in render_artifacts(report).items():
        await write_text(cli.out / name, content)
    logger.info(f"rendered {cli.report} into {cli.out}")


def sweep_points(grid: Dict[str, List[Any]]) -> List[Dict[str, Any]]:
    keys = sorted(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise UsageError(f"sweep grid entry '{k}' must be a non-empty list")
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


async def run_sweep(cli: _CliConfig) -> None:
    try:
        grid = json.loads(cli.grid.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"sweep grid {cli.grid} not found")
    except json.JSONDecodeError as e:
        raise UsageError(f"invalid sweep grid {cli.grid}: {e}")

    targets, tracks = load_targets(cli)
    points = []
    for i, overrides in enumerate(sweep_points(grid)):
        cfg = cli.config.with_overrides(overrides)
        logger.info(f"sweep point {i}: {overrides}")
        samples = await samples_for(targets, tracks, cfg, cli, cli.task)
        report = await evaluate(samples, cfg, cli.task, cli.seed)
        await write_report(report, cli.out / f"point_{i:03d}")

        point = {"index": i, "overrides": overrides, "summary": summary(report)}
        points.append(point)
        result = await put_json(cli.out / "sweep.json", "points", lambda acc: (acc or []) + [point])
        if isinstance(result, Error):
            raise DataError(result.error)

    await write_text(cli.out / "sweep.txt", sweep_table(points))


async def dispatch(cli: _CliConfig) -> None:
    match cli.command:
        case Command.Simulate:
            await run_simulate(cli)
        case Command.Extract:
            await run_extract(cli)
        case Command.Train:
            await run_train(cli)
        case Command.Predict:
            await run_predict(cli)
        case Command.Evaluate:
            await run_evaluate(cli)
        case Command.Report:
            await run_report(cli)
        case Command.Sweep:
            await run_sweep(cli)
        case Command.Config:
            print(cli.config.to_json())


def _gait_error(e: BaseException) -> Optional[GaitError]:
    if isinstance(e, GaitError):
        return e
    if isinstance(e, BaseExceptionGroup):
        for inner in e.exceptions:
            found = _gait_error(inner)
            if found:
                return found
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli = _CliConfig.new_from_args(argv)
        if cli.command is Command.Sweep and cli.out:
            (cli.out / "sweep.json").unlink(missing_ok=True)
        asyncio.run(dispatch(cli))
    except Exception as e:
        known = _gait_error(e)
        if known is None:
            logger.error(f"unexpected error: {e}\n{traceback.format_exc()}")
            return 2
        logger.error(f"{type(known).__name__}: {known}")
        return known.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
