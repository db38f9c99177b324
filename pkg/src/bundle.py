"""Model bundle file.

Layout: magic b"GRDM", uint16 format version, uint32 header length, the
canonical-JSON header, then the raw sections. Every section is little-endian
and row-major; the header's section table gives name, dtype, shape, offset,
byte length and sha1 of each.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from config import PipelineConfig, Task
from errors import ModelFormatError, ModelVersionError, UsageError
from forest import DecisionTree, RandomForest
from models import MotionClass
from pipeline import HeightPipeline, MotionPipeline
from sparse_dictionary import ClassDictionary
from utils import logger
from utils.hash import calculate_hash

MAGIC = b"GRDM"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sHI")
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value")


@dataclass
class ModelBundle:
    task: Task
    config: PipelineConfig
    forest: RandomForest
    feature_names: Tuple[str, ...]
    dictionaries: List[ClassDictionary] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_pipeline(cls, pipeline: HeightPipeline | MotionPipeline) -> "ModelBundle":
        task = Task.from_str(pipeline.task)
        return cls(
            task=task,
            config=pipeline.cfg,
            forest=pipeline.forest,
            feature_names=tuple(pipeline.feature_names),
            dictionaries=list(getattr(pipeline, "dictionaries", [])),
        )

    def to_pipeline(self) -> HeightPipeline | MotionPipeline:
        if self.task.is_height():
            return HeightPipeline(self.config, self.forest)
        return MotionPipeline(self.config, self.dictionaries, self.forest)


class _SectionWriter:
    def __init__(self):
        self.table: List[Dict[str, Any]] = []
        self.chunks: List[bytes] = []
        self.offset = 0

    def add(self, name: str, array: np.ndarray) -> None:
        kind = "<i8" if np.issubdtype(array.dtype, np.integer) else "<f8"
        data = np.ascontiguousarray(array, dtype=kind).tobytes()
        self.table.append(
            {
                "name": name,
                "dtype": kind,
                "shape": list(array.shape),
                "offset": self.offset,
                "length": len(data),
                "sha1": calculate_hash(data),
            }
        )
        self.chunks.append(data)
        self.offset += len(data)


def encode_bundle(bundle: ModelBundle) -> bytes:
    sections = _SectionWriter()
    forest = bundle.forest
    for i, tree in enumerate(forest.trees):
        for name in _TREE_FIELDS:
            sections.add(f"tree/{i}/{name}", getattr(tree, name))
    sections.add("forest/importances", forest.importances)
    if forest.classes is not None:
        sections.add("forest/classes", forest.classes)
    for d in bundle.dictionaries:
        sections.add(f"dictionary/{d.motion.label}", d.atoms)

    header = {
        "kind": bundle.task.key,
        "config": bundle.config.to_dict(),
        "feature_names": list(bundle.feature_names),
        "forest": {"task": forest.task, "n_features": forest.n_features, "n_trees": len(forest.trees), "seed": forest.seed},
        "dictionaries": [
            {"class": d.motion.label, "code": int(d.motion), "P": d.P, "K": d.K, "lambda": d.lam}
            for d in bundle.dictionaries
        ],
        "sections": sections.table,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREAMBLE.pack(MAGIC, bundle.format_version, len(header_bytes)) + header_bytes + b"".join(sections.chunks)


def decode_bundle(raw: bytes) -> ModelBundle:
    if len(raw) < _PREAMBLE.size:
        raise ModelFormatError("model file is truncated")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise ModelFormatError(f"not a model bundle (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"bundle format version {version}, this build reads version {FORMAT_VERSION}")

    start = _PREAMBLE.size
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"corrupt bundle header: {e}")
    body = raw[start + header_len :]
    try:
        return _from_header(header, body, version)
    except (KeyError, TypeError, ValueError, IndexError, UsageError) as e:
        raise ModelFormatError(f"malformed bundle header: {type(e).__name__}: {e}")


def _from_header(header: Dict[str, Any], body: bytes, version: int) -> ModelBundle:
    arrays: Dict[str, np.ndarray] = {}
    for entry in header["sections"]:
        chunk = body[entry["offset"] : entry["offset"] + entry["length"]]
        if len(chunk) != entry["length"] or calculate_hash(chunk) != entry["sha1"]:
            raise ModelFormatError(f"section {entry['name']} is truncated or corrupt")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=entry["dtype"]).reshape(entry["shape"]).copy()

    meta = header["forest"]
    trees = tuple(
        DecisionTree(**{name: arrays[f"tree/{i}/{name}"] for name in _TREE_FIELDS}) for i in range(meta["n_trees"])
    )
    forest = RandomForest(
        task=meta["task"],
        trees=trees,
        n_features=meta["n_features"],
        importances=arrays["forest/importances"],
        seed=meta["seed"],
        classes=arrays.get("forest/classes"),
    )
    dictionaries = [
        ClassDictionary(motion=MotionClass(d["code"]), atoms=arrays[f"dictionary/{d['class']}"], lam=d["lambda"])
        for d in header["dictionaries"]
    ]
    return ModelBundle(
        task=Task.from_str(header["kind"]),
        config=PipelineConfig.from_dict(header["config"]),
        forest=forest,
        feature_names=tuple(header["feature_names"]),
        dictionaries=dictionaries,
        format_version=version,
    )


def save_bundle(bundle: ModelBundle, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = encode_bundle(bundle)
    path.write_bytes(raw)
    logger.info(f"wrote {bundle.task.key} bundle to {path} ({len(raw):,} bytes)")


def load_bundle(path: Path) -> ModelBundle:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise ModelFormatError(f"model file {path} not found")
    return decode_bundle(raw)

