"""Synthetic radar targets of a pedestrian with known height and motion class.

Each body part moves along the heading with a class-specific periodic speed
profile, driven by a gait cycle counted in body-travel distance. Walking
strides follow the Boulic-Thalmann relation, so the closed-form height model
is exact on noiseless output.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import UsageError
from height import boulic_stride_length
from models import MotionClass, TargetTable, TrackInfo
from utils.rng import child_rng

SPEED_BOUNDS: Dict[MotionClass, Tuple[float, float]] = {
    MotionClass.WALK: (0.7, 2.0),
    MotionClass.RUN: (2.0, 5.0),
    MotionClass.JUMP: (0.3, 1.5),
    MotionClass.CRUTCHES: (0.4, 1.2),
    MotionClass.SKATEBOARD: (1.5, 5.0),
    MotionClass.WHEELCHAIR: (0.5, 2.0),
}
HEIGHT_BOUNDS = (1.4, 2.1)

# sensor accuracies, used as one-sigma noise per axis
POINT_ACCURACY = 0.2
SPEED_ACCURACY = 0.1 / 3.6


@dataclass(frozen=True)
class SimConfig:
    duration: float = 45.0
    mean_dt: float = 0.018
    dt_jitter: float = 0.5
    min_targets_per_frame: int = 1
    max_targets_per_frame: int = 5
    position_noise_sigma: float = POINT_ACCURACY
    doppler_noise_sigma: float = SPEED_ACCURACY
    sensor: Tuple[float, float] = (0.0, 0.0)

    def validate(self) -> None:
        if self.duration < 3.0:
            raise UsageError(f"simulated duration must be at least 3 s, got {self.duration}")
        if self.mean_dt <= 0 or not 0 <= self.dt_jitter < 1:
            raise UsageError("mean_dt must be positive and dt_jitter in [0, 1)")
        if not 1 <= self.min_targets_per_frame <= self.max_targets_per_frame:
            raise UsageError("targets per frame must satisfy 1 <= min <= max")
        if self.position_noise_sigma < 0 or self.doppler_noise_sigma < 0:
            raise UsageError("noise levels must be non-negative")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sensor"] = list(self.sensor)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        if "sensor" in data:
            data["sensor"] = tuple(data["sensor"])
        return cls(**data)


@dataclass(frozen=True)
class SubjectSpec:
    height: float
    motion: MotionClass
    speed: float
    heading: float = 0.0
    start: Tuple[float, float] = (5.0, 0.0)
    seed: int = 0
    subject_id: str = "s0"
    recording_id: str = "r0"

    def validate(self) -> None:
        lo, hi = HEIGHT_BOUNDS
        if not lo <= self.height <= hi:
            raise UsageError(f"height {self.height} m outside [{lo}, {hi}]")
        lo, hi = SPEED_BOUNDS[self.motion]
        if not lo <= self.speed <= hi:
            raise UsageError(f"{self.motion.label} speed {self.speed} m/s outside [{lo}, {hi}]")

    @property
    def track_id(self) -> str:
        return f"{self.subject_id}/{self.recording_id}"

    def label_for(self, task: str) -> float | MotionClass:
        """ground truth carried by the manifest: body height for the height task, else the class"""
        return self.height if task == "height" else self.motion

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "motion": self.motion.label,
            "speed": self.speed,
            "heading": self.heading,
            "start": list(self.start),
            "seed": self.seed,
            "subject_id": self.subject_id,
            "recording_id": self.recording_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SubjectSpec":
        return cls(
            height=float(data["height"]),
            motion=MotionClass.from_str(data["motion"]),
            speed=float(data["speed"]),
            heading=float(data.get("heading", 0.0)),
            start=tuple(data.get("start", (5.0, 0.0))),
            seed=int(data.get("seed", 0)),
            subject_id=str(data.get("subject_id", "s0")),
            recording_id=str(data.get("recording_id", "r0")),
        )


@dataclass(frozen=True)
class _Limb:
    """
    One reflecting body part beside the torso. `stance`/`ride` describe a limb
    that rests on the ground, swings forward, then optionally rides with the
    body; `sway` is the relative speed amplitude of a swinging arm or hand.
    A limb with neither moves rigidly with the body.
    """

    weight: float
    lateral: float
    phase: float = 0.0
    stance: float = 0.0
    ride: float = 0.0
    sway: float = 0.0


@dataclass(frozen=True)
class _Gait:
    cycle_length: float
    limbs: Dict[str, _Limb]
    body_weight: float = 0.35
    body_modulation: float = 0.0
    body_harmonic: int = 2


def _legs(weight: float, stance: float, in_phase: bool = False) -> Dict[str, _Limb]:
    return {
        "left_foot": _Limb(weight, 0.1, 0.0, stance=stance),
        "right_foot": _Limb(weight, -0.1, 0.0 if in_phase else 0.5, stance=stance),
    }


def _arms(weight: float, sway: float, lateral: float = 0.2, names=("left_arm", "right_arm")) -> Dict[str, _Limb]:
    left, right = names
    return {
        left: _Limb(weight, lateral, 0.5, sway=sway),
        right: _Limb(weight, -lateral, 0.0, sway=sway),
    }


def gait_model(spec: SubjectSpec) -> _Gait:
    h, v = spec.height, spec.speed
    match spec.motion:
        case MotionClass.WALK:
            return _Gait(
                cycle_length=boulic_stride_length(h, v),
                limbs=_legs(0.225, 0.6) | _arms(0.1, 0.7),
                body_modulation=0.15,
            )
        case MotionClass.RUN:
            return _Gait(
                cycle_length=1.25 * h * float(np.sqrt(v / 3.0)),
                limbs=_legs(0.225, 0.35) | _arms(0.1, 0.9),
                body_modulation=0.25,
            )
        case MotionClass.JUMP:
            return _Gait(
                cycle_length=v / 1.8,
                limbs=_legs(0.225, 0.5, in_phase=True) | _arms(0.1, 0.2),
                body_modulation=0.9,
                body_harmonic=1,
            )
        case MotionClass.CRUTCHES:
            crutches = {
                "left_crutch": _Limb(0.125, 0.35, 0.0, stance=0.5),
                "right_crutch": _Limb(0.125, -0.35, 0.0, stance=0.5),
            }
            legs = {
                "left_foot": _Limb(0.2, 0.1, 0.5, stance=0.5),
                "right_foot": _Limb(0.2, -0.1, 0.5, stance=0.5),
            }
            return _Gait(
                cycle_length=0.9 * (h / 1.8) * float(np.sqrt(v / 0.8)),
                limbs=crutches | legs,
                body_modulation=0.4,
                body_harmonic=1,
            )
        case MotionClass.SKATEBOARD:
            feet = {
                "push_foot": _Limb(0.15, -0.15, 0.0, stance=0.25, ride=0.5),
                "board_foot": _Limb(0.15, 0.1),
            }
            return _Gait(cycle_length=2.0 * v, limbs=feet | _arms(0.1, 0.1, 0.25), body_weight=0.5)
        case MotionClass.WHEELCHAIR:
            rigid = {
                "left_foot": _Limb(0.1, 0.1),
                "right_foot": _Limb(0.1, -0.1),
                "left_wheel": _Limb(0.1, 0.3),
                "right_wheel": _Limb(0.1, -0.3),
            }
            hands = _arms(0.1, 0.4, 0.3, names=("left_hand", "right_hand"))
            return _Gait(cycle_length=v, limbs=rigid | hands, body_weight=0.4)
    raise UsageError(f"no gait model for {spec.motion}")


def limb_profile(limb: _Limb, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    (offset from the body in cycle lengths, speed as a multiple of body speed)
    at cycle phase `phi` in [0, 1)
    """
    if limb.stance <= 0:
        return np.zeros_like(phi), np.ones_like(phi)

    swing = 1.0 - limb.stance - limb.ride
    catch_up = 1.0 - limb.ride
    psi = np.clip((phi - limb.stance) / swing, 0.0, 1.0)
    in_swing = (phi >= limb.stance) & (phi < limb.stance + swing)
    in_ride = phi >= limb.stance + swing

    travelled = np.where(
        in_ride,
        catch_up + (phi - limb.stance - swing),
        catch_up * (psi - np.sin(2 * np.pi * psi) / (2 * np.pi)),
    )
    speed = np.select([in_swing, in_ride], [catch_up / swing * (1 - np.cos(2 * np.pi * psi)), 1.0], 0.0)
    return travelled - phi - _mean_offset(limb), speed


def _mean_offset(limb: _Limb) -> float:
    """cycle-average of travelled - phi, so every limb is centred on the body"""
    s, r = limb.stance, limb.ride
    w = 1.0 - s - r
    # integral of the swing term plus the ride term, minus the mean of phi
    return (1 - r) * (w / 2 + r) + r * r / 2 - 0.5


@dataclass(frozen=True)
class SimRecording:
    spec: SubjectSpec
    targets: TargetTable
    part: np.ndarray
    stride_length: float

    def track_info(self, task: str) -> TrackInfo:
        return TrackInfo(
            subject_id=self.spec.subject_id,
            recording_id=self.spec.recording_id,
            label=self.spec.label_for(task),
        )


def _frame_times(rng: np.random.Generator, cfg: SimConfig) -> np.ndarray:
    count = int(cfg.duration / cfg.mean_dt * 1.5) + 16
    fixed = cfg.mean_dt * (1 - cfg.dt_jitter)
    dt = fixed + rng.exponential(cfg.mean_dt * cfg.dt_jitter, count) if cfg.dt_jitter else np.full(count, fixed)
    t = np.r_[0.0, np.cumsum(dt)[:-1]]
    return t[t < cfg.duration]


def simulate(spec: SubjectSpec, cfg: SimConfig = SimConfig()) -> SimRecording:
    spec.validate()
    cfg.validate()
    rng = child_rng(spec.seed)
    gait = gait_model(spec)
    names = ["torso", *gait.limbs]
    limbs = [None, *gait.limbs.values()]
    weights = np.array([gait.body_weight] + [lb.weight for lb in gait.limbs.values()])

    frames = _frame_times(rng, cfg)
    per_frame = rng.integers(cfg.min_targets_per_frame, cfg.max_targets_per_frame + 1, len(frames))
    t = np.repeat(frames, per_frame)
    part = rng.choice(len(names), size=len(t), p=weights / weights.sum())

    v, L = spec.speed, gait.cycle_length
    cycle = v * t / L + rng.uniform(0.0, 1.0)
    along = v * t
    speed = np.full(len(t), v)
    lateral = np.zeros(len(t))

    torso = part == 0
    k = gait.body_harmonic
    arg = 2 * np.pi * k * cycle[torso]
    along[torso] += gait.body_modulation * L / (2 * np.pi * k) * np.sin(arg)
    speed[torso] = v * (1 + gait.body_modulation * np.cos(arg))

    for idx, limb in enumerate(limbs[1:], start=1):
        sel = part == idx
        phase = cycle[sel] + limb.phase
        lateral[sel] = limb.lateral
        if limb.sway:
            arg = 2 * np.pi * phase
            along[sel] += limb.sway * L / (2 * np.pi) * np.sin(arg)
            speed[sel] = v * (1 + limb.sway * np.cos(arg))
        else:
            offset, factor = limb_profile(limb, np.mod(phase, 1.0))
            along[sel] += L * offset
            speed[sel] = v * factor

    u = np.array([np.cos(spec.heading), np.sin(spec.heading)])
    normal = np.array([-u[1], u[0]])
    pos = np.asarray(spec.start) + np.outer(along, u) + np.outer(lateral, normal)
    los = pos - np.asarray(cfg.sensor)
    los /= np.maximum(np.linalg.norm(los, axis=1, keepdims=True), 1e-9)
    doppler = speed * (los @ u) + rng.normal(0.0, cfg.doppler_noise_sigma, len(t))
    pos = pos + rng.normal(0.0, cfg.position_noise_sigma, pos.shape)

    table = TargetTable(t=t, x=pos[:, 0], y=pos[:, 1], v=doppler, track=np.full(len(t), spec.track_id, dtype=object))
    return SimRecording(spec=spec, targets=table, part=np.array(names, dtype=object)[part], stride_length=L)


def default_scenario(task: str, subjects: int, seed: int = 0) -> List[SubjectSpec]:
    """
    height: one walking recording per subject, heights in [1.5, 2.0] m and
    speeds in [1.0, 1.6] m/s; motion: every subject performs every class once
    """
    rng = child_rng(seed, 0x5CE4A)
    specs = []
    for i in range(subjects):
        height = float(rng.uniform(1.5, 2.0))
        match task:
            case "height":
                motions = [MotionClass.WALK]
            case "motion":
                motions = list(MotionClass)
            case _:
                raise UsageError(f"unknown task '{task}'")
        for motion in motions:
            lo, hi = (1.0, 1.6) if task == "height" else SPEED_BOUNDS[motion]
            specs.append(
                SubjectSpec(
                    height=height,
                    motion=motion,
                    speed=float(rng.uniform(lo, hi)),
                    seed=int(rng.integers(0, 2**63 - 1)),
                    subject_id=f"s{i:03d}",
                    recording_id=motion.label,
                )
            )
    return specs
