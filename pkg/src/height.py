from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np

from errors import OutOfRegime

BOULIC_STRIDE_COEFF = 1.346
THIGH_RATIO = 0.53
# lowest speed with a resolvable stride inside one window, m/s
MIN_WALK_SPEED = 0.2
PLAUSIBLE_HEIGHT = (0.5, 2.5)

FEATURE_NAMES: Tuple[str, ...] = ("v", "l", "v*l", "v^2*l", "v*l^2", "l/v", "l/v^2", "l^2/v")


@dataclass(frozen=True)
class HeightEstimate:
    h: float
    source: Literal["model", "forest"] = "model"

    @property
    def flagged(self) -> bool:
        lo, hi = PLAUSIBLE_HEIGHT
        return not lo < self.h < hi


def _check_regime(v: float, l: float) -> None:
    if not (np.isfinite(v) and np.isfinite(l)):
        raise OutOfRegime(f"non-finite speed or stride ({v}, {l})")
    if v <= MIN_WALK_SPEED:
        raise OutOfRegime(f"speed {v:.3f} m/s is not above {MIN_WALK_SPEED} m/s")
    if l <= 0:
        raise OutOfRegime(f"stride length must be positive, got {l}")


def boulic_height(v: float, l: float) -> HeightEstimate:
    """body height of an average human walking at `v` with stride length `l`"""
    _check_regime(v, l)
    return HeightEstimate(h=l * l / (BOULIC_STRIDE_COEFF**2 * THIGH_RATIO * v), source="model")


def boulic_stride_length(h: float, v: float) -> float:
    """
    inverse of boulic_height: l = 1.346 * sqrt(v / h_t) * h_t with thigh height h_t = 0.53 * h
    """
    h_t = THIGH_RATIO * h
    return BOULIC_STRIDE_COEFF * float(np.sqrt(v / h_t)) * h_t


def height_features(v: float, l: float) -> np.ndarray:
    _check_regime(v, l)
    features = np.array([v, l, v * l, v * v * l, v * l * l, l / v, l / (v * v), l * l / v])
    if not np.all(np.isfinite(features)):
        raise OutOfRegime(f"non-finite height features for v={v}, l={l}")
    return features
