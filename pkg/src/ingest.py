"""Target-log and manifest ingestion.

One record per target: {"t", "track", "v"} plus either Cartesian {"x", "y"}
or polar {"r", "phi", "sx", "sy", "syaw"} with the sensor pose; polar records
are converted to the earth-fixed frame here and nowhere else.
"""

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional

from errors import DataError, UsageError
from models import Error, Ok, RadarTarget, Result, TargetTable, TrackInfo
from utils import logger

CSV_COLUMNS = ("t", "track", "x", "y", "v")


@dataclass
class IngestResult:
    targets: TargetTable
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)


def detect_format(path: Path, fmt: Optional[str] = None) -> str:
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    match fmt:
        case "jsonl" | "ndjson":
            return "jsonl"
        case "csv":
            return "csv"
        case _:
            raise UsageError(f"unknown target-log format '{fmt}' for {path}")


def _number(record: Mapping, key: str) -> float:
    value = record.get(key)
    if value is None or value == "":
        raise KeyError(key)
    return float(value)


def parse_record(record: Mapping) -> Result[RadarTarget, str]:
    try:
        track = record.get("track")
        if track is None or track == "":
            return Error("missing track")
        if record.get("x") not in (None, "") or record.get("y") not in (None, ""):
            x, y = _number(record, "x"), _number(record, "y")
        else:
            r, phi = _number(record, "r"), _number(record, "phi")
            sx, sy, syaw = _number(record, "sx"), _number(record, "sy"), _number(record, "syaw")
            x = sx + r * math.cos(syaw + phi)
            y = sy + r * math.sin(syaw + phi)
        target = RadarTarget(t=_number(record, "t"), x=x, y=y, v=_number(record, "v"), track_id=str(track))
    except KeyError as e:
        return Error(f"missing field {e}")
    except (TypeError, ValueError) as e:
        return Error(f"bad value: {e}")
    return target.check()


def _records(path: Path, fmt: str) -> Iterator[Result[Mapping, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        if fmt == "csv":
            for row in csv.DictReader(f):
                yield Ok(row)
            return
        for line in f:
            if not line.strip():
                continue
            try:
                value = json.loads(line)
            except json.JSONDecodeError as e:
                yield Error(f"malformed JSON: {e.msg}")
                continue
            yield Ok(value) if isinstance(value, dict) else Error("record is not an object")


def ingest(path: Path, fmt: Optional[str] = None, strict: bool = False) -> IngestResult:
    path = Path(path)
    fmt = detect_format(path, fmt)
    if not path.exists():
        raise DataError(f"target log {path} not found")

    targets: List[RadarTarget] = []
    reasons: Counter = Counter()
    for line_no, raw in enumerate(_records(path, fmt), start=1):
        parsed = parse_record(raw.value) if isinstance(raw, Ok) else raw
        if isinstance(parsed, Error):
            if strict:
                raise DataError(f"{path}:{line_no}: {parsed.error}")
            reasons[parsed.error.split(":")[0]] += 1
            logger.debug(f"{path}:{line_no}: rejected ({parsed.error})")
            continue
        targets.append(parsed.value)

    rejected = sum(reasons.values())
    if rejected:
        logger.warning(f"{path}: rejected {rejected} records ({dict(reasons)})")
    logger.info(f"{path}: ingested {len(targets)} targets")
    return IngestResult(targets=TargetTable.from_targets(targets), rejected=rejected, reasons=reasons)


def ingest_many(paths: List[Path], strict: bool = False) -> IngestResult:
    results = [ingest(p, strict=strict) for p in paths]
    reasons: Counter = Counter()
    for r in results:
        reasons.update(r.reasons)
    return IngestResult(
        targets=TargetTable.concat([r.targets for r in results]),
        rejected=sum(r.rejected for r in results),
        reasons=reasons,
    )


def load_manifest(path: Optional[Path]) -> Dict[str, TrackInfo]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return {str(track): TrackInfo.from_dict(info) for track, info in data["tracks"].items()}
    except FileNotFoundError:
        raise DataError(f"manifest {path} not found")
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataError(f"malformed manifest {path}: {e}")


def target_records(table: TargetTable) -> Iterator[dict]:
    for t, x, y, v, track in zip(table.t, table.x, table.y, table.v, table.track):
        yield {"t": float(t), "track": str(track), "x": float(x), "y": float(y), "v": float(v)}


def to_jsonl(table: TargetTable) -> str:
    return "".join(json.dumps(r) + "\n" for r in target_records(table))


def to_csv(table: TargetTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in target_records(table):
        writer.writerow([repr(r["t"]), r["track"], repr(r["x"]), repr(r["y"]), repr(r["v"])])
    return out.getvalue()


def manifest_json(tracks: Mapping[str, TrackInfo]) -> str:
    return json.dumps({"tracks": {k: tracks[k].to_dict() for k in sorted(tracks)}}, sort_keys=True, indent=2)
