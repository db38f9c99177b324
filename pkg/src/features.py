"""Per-window feature extraction.

Both extractors return a `Result`: a window that cannot be processed (no
usable trajectory, speed outside the walking regime, too little path) comes
back as `Error` with the reason, and the caller skips it.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import PipelineConfig
from errors import GaitError
from gait_spectrum import StrideEstimate, stride_from_window
from height import HeightEstimate, boulic_height, height_features
from models import Error, Ok, Result, TargetWindow
from motion_features import DopplerGrid, grid_transform, hog, moment_features
from sparse_dictionary import spectral_image
from trajectory import LinearTrajectory, fit_trajectory, frenet_transform
from utils.hash import stable_key
from utils.rng import derive_seed


@dataclass(frozen=True)
class HeightSample:
    window: TargetWindow
    trajectory: LinearTrajectory
    stride: StrideEstimate
    features: np.ndarray
    baseline: HeightEstimate


@dataclass(frozen=True)
class MotionSample:
    window: TargetWindow
    trajectory: LinearTrajectory
    moments: np.ndarray
    hog: np.ndarray
    grid: DopplerGrid
    image: np.ndarray

    @property
    def base_features(self) -> np.ndarray:
        return np.concatenate([self.moments, self.hog])


def window_seed(seed: int, w: TargetWindow) -> int:
    """RANSAC seed of a window, independent of window order"""
    return derive_seed(seed, stable_key(w.track_id), int(round(w.start * 1000)))


def extract_height(w: TargetWindow, cfg: PipelineConfig, seed: int) -> Result[HeightSample, str]:
    try:
        traj = fit_trajectory(w, cfg.ransac, window_seed(seed, w))
        stride = stride_from_window(frenet_transform(w, traj, cfg.frenet.along), cfg.spectrum)
        features = height_features(traj.v_ped, stride.l_s)
        baseline = boulic_height(traj.v_ped, stride.l_s)
    except GaitError as e:
        return Error(f"{w.key}: {type(e).__name__}: {e}")
    return Ok(HeightSample(window=w, trajectory=traj, stride=stride, features=features, baseline=baseline))


def extract_motion(w: TargetWindow, cfg: PipelineConfig, seed: int) -> Result[MotionSample, str]:
    try:
        traj = fit_trajectory(w, cfg.ransac, window_seed(seed, w))
        grid = grid_transform(frenet_transform(w, traj, cfg.frenet.along), traj.v_ped, cfg.grid)
        sample = MotionSample(
            window=w,
            trajectory=traj,
            moments=moment_features(w).as_array(),
            hog=hog(grid, cfg.grid.hog_bins),
            grid=grid,
            image=spectral_image(grid),
        )
    except GaitError as e:
        return Error(f"{w.key}: {type(e).__name__}: {e}")
    return Ok(sample)


def extract(w: TargetWindow, cfg: PipelineConfig, seed: int, task_key: str) -> Result[HeightSample | MotionSample, str]:
    return extract_height(w, cfg, seed) if task_key == "height" else extract_motion(w, cfg, seed)


def window_label(w: TargetWindow) -> Optional[float | int]:
    if w.label is None:
        return None
    return float(w.label) if isinstance(w.label, float) else int(w.label)
