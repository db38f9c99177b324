from dataclasses import dataclass
from enum import IntEnum
from typing import Generic, Iterable, Iterator, List, Optional, TypeVar, Union

import numpy as np

from errors import DataError

T = TypeVar("T")
E = TypeVar("E")

# sanity bound for pedestrian-class objects, m/s
MAX_ABS_DOPPLER = 15.0


@dataclass
class Ok(Generic[T]):
    value: T


@dataclass
class Error(Generic[E]):
    error: E


Result = Union[Ok[T], Error[E]]


class MotionClass(IntEnum):
    WALK = 0
    RUN = 1
    JUMP = 2
    CRUTCHES = 3
    SKATEBOARD = 4
    WHEELCHAIR = 5

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_str(cls, value: str) -> "MotionClass":
        match value.strip().lower():
            case "walk":
                return cls.WALK
            case "run":
                return cls.RUN
            case "jump":
                return cls.JUMP
            case "crutches":
                return cls.CRUTCHES
            case "skateboard":
                return cls.SKATEBOARD
            case "wheelchair":
                return cls.WHEELCHAIR
            case _:
                raise DataError(f"unknown motion class '{value}'")


Label = Union[float, MotionClass]


@dataclass(frozen=True)
class RadarTarget:
    t: float
    x: float
    y: float
    v: float
    track_id: str

    def check(self) -> Result["RadarTarget", str]:
        values = (self.t, self.x, self.y, self.v)
        if not all(np.isfinite(values)):
            return Error(f"non-finite field in target of track {self.track_id}")
        if abs(self.v) > MAX_ABS_DOPPLER:
            return Error(f"|v| = {abs(self.v):.2f} m/s exceeds {MAX_ABS_DOPPLER}")
        return Ok(self)


def _frozen(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TargetTable:
    """Columnar RadarTarget stream, one row per target."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    track: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.t)
        for name in ("x", "y", "v", "track"):
            if len(getattr(self, name)) != n:
                raise DataError(f"column '{name}' has {len(getattr(self, name))} rows, expected {n}")
        for name in ("t", "x", "y", "v"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "track", _frozen(self.track, dtype=object))

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[RadarTarget]:
        for i in range(len(self)):
            yield self.row(i)

    def row(self, i: int) -> RadarTarget:
        return RadarTarget(
            t=float(self.t[i]),
            x=float(self.x[i]),
            y=float(self.y[i]),
            v=float(self.v[i]),
            track_id=str(self.track[i]),
        )

    def take(self, index: np.ndarray) -> "TargetTable":
        return TargetTable(
            t=self.t[index], x=self.x[index], y=self.y[index], v=self.v[index], track=self.track[index]
        )

    @classmethod
    def empty(cls) -> "TargetTable":
        return cls(t=[], x=[], y=[], v=[], track=[])

    @classmethod
    def from_targets(cls, targets: Iterable[RadarTarget]) -> "TargetTable":
        rows = list(targets)
        return cls(
            t=[r.t for r in rows],
            x=[r.x for r in rows],
            y=[r.y for r in rows],
            v=[r.v for r in rows],
            track=[r.track_id for r in rows],
        )

    @classmethod
    def concat(cls, tables: Iterable["TargetTable"]) -> "TargetTable":
        tables = [tb for tb in tables if len(tb)]
        if not tables:
            return cls.empty()
        return cls(
            t=np.concatenate([tb.t for tb in tables]),
            x=np.concatenate([tb.x for tb in tables]),
            y=np.concatenate([tb.y for tb in tables]),
            v=np.concatenate([tb.v for tb in tables]),
            track=np.concatenate([tb.track for tb in tables]),
        )


@dataclass(frozen=True)
class TrackInfo:
    subject_id: str
    recording_id: str
    label: Optional[Label] = None

    @classmethod
    def from_dict(cls, data: dict) -> "TrackInfo":
        raw = data.get("label")
        label: Optional[Label]
        match raw:
            case None:
                label = None
            case str():
                label = MotionClass.from_str(raw)
            case int() | float():
                label = float(raw)
            case _:
                raise DataError(f"unsupported label {raw!r}")
        return cls(subject_id=str(data["subject_id"]), recording_id=str(data["recording_id"]), label=label)

    def to_dict(self) -> dict:
        label = self.label.label if isinstance(self.label, MotionClass) else self.label
        return {"subject_id": self.subject_id, "recording_id": self.recording_id, "label": label}


@dataclass(frozen=True)
class TargetWindow:
    """All targets of one track inside [start, start + duration)."""

    track_id: str
    start: float
    duration: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    label: Optional[Label] = None
    subject_id: Optional[str] = None
    recording_id: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("t", "x", "y", "v"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def targets(self) -> List[RadarTarget]:
        return [
            RadarTarget(float(t), float(x), float(y), float(v), self.track_id)
            for t, x, y, v in zip(self.t, self.x, self.y, self.v)
        ]

    @property
    def key(self) -> str:
        return f"{self.track_id}@{self.start:.3f}"

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

