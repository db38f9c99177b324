"""Constant-velocity trajectory fitting and projection onto the walking path.

The trajectory is fit with RANSAC over (t, x, y) only; Doppler never enters
the fit. Inliers are targets within `inlier_band` metres of the hypothesis
position at the target's own timestamp.
"""

from dataclasses import asdict, dataclass
from typing import Iterator, Literal, Tuple, Union

import numpy as np

from errors import DegenerateTrajectory, PreconditionError, UsageError
from models import TargetWindow
from windows import N_MIN

# attempts at redrawing sample pairs that share a timestamp
_MAX_REDRAWS = 32


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 200
    inlier_band: float = 0.5
    min_inliers_floor: int = 10
    min_inlier_fraction: float = 0.5
    min_speed: float = 0.1
    min_span: float = 0.5

    def min_inliers(self, n: int) -> int:
        return max(self.min_inliers_floor, int(np.ceil(self.min_inlier_fraction * n)))

    def to_dict(self) -> dict:
        return asdict(self)


Along = Literal["measured", "track"]


@dataclass(frozen=True)
class FrenetConfig:
    """
    `along` picks the tangential distance: "measured" projects each detection,
    "track" projects the fitted body position at the detection time
    """

    along: Along = "track"

    def __post_init__(self):
        if self.along not in ("measured", "track"):
            raise UsageError(f"unknown tangential distance '{self.along}', expected 'measured' or 'track'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LinearTrajectory:
    origin: Tuple[float, float]
    velocity: Tuple[float, float]
    t_ref: float
    inlier_count: int

    @property
    def v_ped(self) -> float:
        return float(np.hypot(*self.velocity))

    @property
    def direction(self) -> np.ndarray:
        if self.v_ped == 0.0:
            raise PreconditionError("travel direction undefined for a zero-speed trajectory")
        return np.asarray(self.velocity) / self.v_ped

    @property
    def normal(self) -> np.ndarray:
        """unit vector pointing to the left of the travel direction"""
        ux, uy = self.direction
        return np.array([-uy, ux])

    def position(self, t: np.ndarray) -> np.ndarray:
        dt = np.asarray(t, dtype=float) - self.t_ref
        return np.asarray(self.origin) + np.multiply.outer(dt, np.asarray(self.velocity))


@dataclass(frozen=True)
class FrenetTarget:
    d: float
    n: float
    v: float
    t: float


@dataclass(frozen=True)
class FrenetTargets:
    """Columnar list of FrenetTarget, same order as the window's targets."""

    d: np.ndarray
    n: np.ndarray
    v: np.ndarray
    t: np.ndarray

    def __len__(self) -> int:
        return len(self.d)

    def __getitem__(self, i: int) -> FrenetTarget:
        return FrenetTarget(float(self.d[i]), float(self.n[i]), float(self.v[i]), float(self.t[i]))

    def __iter__(self) -> Iterator[FrenetTarget]:
        return (self[i] for i in range(len(self)))


class Polyline:
    """
    Reference path through a list of vertices. The first and last segments are
    extended beyond the end vertices, so every point has a projection.
    """

    def __init__(self, vertices: np.ndarray):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or len(self.vertices) < 2:
            raise PreconditionError("a polyline needs at least two 2D vertices")
        seg = np.diff(self.vertices, axis=0)
        self._length = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(self._length == 0):
            raise PreconditionError("polyline has repeated consecutive vertices")
        self._tangent = seg / self._length[:, None]
        self._arc = np.r_[0.0, np.cumsum(self._length)[:-1]]

    def project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rel = points[:, None, :] - self.vertices[None, :-1, :]
        along = np.einsum("nsk,sk->ns", rel, self._tangent)
        lo = np.zeros_like(along)
        hi = np.broadcast_to(self._length, along.shape).copy()
        lo[:, 0] = -np.inf
        hi[:, -1] = np.inf
        along = np.clip(along, lo, hi)

        foot = self.vertices[None, :-1, :] + along[..., None] * self._tangent[None]
        offset = points[:, None, :] - foot
        dist = np.hypot(offset[..., 0], offset[..., 1])
        best = np.argmin(dist, axis=1)
        rows = np.arange(len(points))

        tx, ty = self._tangent[best, 0], self._tangent[best, 1]
        ox, oy = offset[rows, best, 0], offset[rows, best, 1]
        d = self._arc[best] + along[rows, best]
        n = tx * oy - ty * ox
        return d, n


def _draw_pairs(rng: np.random.Generator, t: np.ndarray, count: int) -> Tuple[np.ndarray, np.ndarray]:
    n = len(t)
    i = rng.integers(0, n, count)
    j = (i + rng.integers(1, n, count)) % n
    for _ in range(_MAX_REDRAWS):
        same = t[i] == t[j]
        if not same.any():
            return i, j
        k = int(same.sum())
        i[same] = rng.integers(0, n, k)
        j[same] = (i[same] + rng.integers(1, n, k)) % n
    keep = t[i] != t[j]
    if not keep.any():
        raise DegenerateTrajectory("all sampled target pairs share a timestamp")
    return i[keep], j[keep]


def fit_trajectory(w: TargetWindow, cfg: RansacConfig = RansacConfig(), seed: int = 0) -> LinearTrajectory:
    n = len(w)
    if n < N_MIN:
        raise PreconditionError(f"trajectory fit needs at least {N_MIN} targets, got {n}")
    span = float(w.t[-1] - w.t[0])
    if span <= cfg.min_span:
        raise PreconditionError(f"window time span {span:.3f}s is not above {cfg.min_span}s")

    rng = np.random.default_rng(seed)
    t, p = w.t, w.points
    i, j = _draw_pairs(rng, t, cfg.iterations)

    # hypotheses x (rows) against targets (columns)
    vel = (p[j] - p[i]) / (t[j] - t[i])[:, None]
    pred = p[i][:, None, :] + vel[:, None, :] * (t[None, :] - t[i][:, None])[..., None]
    resid = np.hypot(*(p[None, :, :] - pred).transpose(2, 0, 1))
    inliers = resid <= cfg.inlier_band
    best = int(np.argmax(inliers.sum(axis=1)))
    mask = inliers[best]
    count = int(mask.sum())

    needed = cfg.min_inliers(n)
    if count < needed:
        raise DegenerateTrajectory(f"only {count} inliers after {cfg.iterations} iterations, need {needed}")

    t_ref = float(t[0])
    design = np.column_stack([np.ones(count), t[mask] - t_ref])
    coef, *_ = np.linalg.lstsq(design, p[mask], rcond=None)
    traj = LinearTrajectory(
        origin=(float(coef[0, 0]), float(coef[0, 1])),
        velocity=(float(coef[1, 0]), float(coef[1, 1])),
        t_ref=t_ref,
        inlier_count=count,
    )

    if not np.isfinite(traj.v_ped):
        raise DegenerateTrajectory("least-squares refit produced a non-finite speed")
    if traj.v_ped < cfg.min_speed:
        raise DegenerateTrajectory(f"speed {traj.v_ped:.3f} m/s below {cfg.min_speed} m/s")
    return traj


def frenet_transform(
    w: TargetWindow, path: Union[LinearTrajectory, Polyline], along: Along = "measured"
) -> FrenetTargets:
    """
    Projects every target onto the path. For a LinearTrajectory the travel
    direction follows the fitted velocity, so d grows with t.

    With `along="track"` d is v_ped · (t - t_ref), the body's own travelled
    distance; n stays the measured lateral offset.
    """
    p = w.points
    if isinstance(path, Polyline):
        if along != "measured":
            raise PreconditionError("a polyline path only supports measured tangential distance")
        d, n = path.project(p)
    else:
        rel = p - np.asarray(path.origin)
        n = rel @ path.normal
        match along:
            case "measured":
                d = rel @ path.direction
            case "track":
                d = path.v_ped * (np.asarray(w.t, dtype=float) - path.t_ref)
            case _:
                raise PreconditionError(f"unknown tangential distance '{along}'")
    return FrenetTargets(d=d, n=n, v=np.array(w.v), t=np.array(w.t))
