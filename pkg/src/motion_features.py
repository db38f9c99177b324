"""Motion-classification features of one window.

- central Doppler moments, computed on the raw Doppler values
- the Doppler-deviation grid in path coordinates
- a single global histogram of unsigned gradient orientations over that grid
"""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from errors import PreconditionError
from models import TargetWindow
from trajectory import FrenetTargets
from windows import N_MIN

MOMENT_NAMES: Tuple[str, ...] = ("mu2", "mu3", "mu4", "abs_mu1")


@dataclass(frozen=True)
class GridConfig:
    cell_d: float = 0.1
    cell_n: float = 0.1
    rows: int = 20
    cols: int = 64
    n_limit: float = 1.0
    smooth_sigma: float = 0.05
    w_min: float = 1e-6
    hog_bins: int = 9

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MomentFeatures:
    mu2: float
    mu3: float
    mu4: float
    abs_mu1: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mu2, self.mu3, self.mu4, self.abs_mu1])


@dataclass(frozen=True)
class DopplerGrid:
    cells: np.ndarray
    occupancy: np.ndarray
    cell_size: Tuple[float, float]
    extent: Tuple[float, float, float, float]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape


def moment_features(w: TargetWindow | np.ndarray) -> MomentFeatures:
    v = np.asarray(w.v if isinstance(w, TargetWindow) else w, dtype=float)
    n = len(v)
    if n < 2:
        raise PreconditionError(f"moments need at least 2 targets, got {n}")
    dev = v - v.mean()
    return MomentFeatures(
        mu2=float(np.sum(dev**2) / (n - 1)),
        mu3=float(np.sum(dev**3) / (n - 1)),
        mu4=float(np.sum(dev**4) / (n - 1)),
        abs_mu1=float(np.sum(np.abs(dev)) / (n - 1)),
    )


def _axis(lo: float, count: int, step: float) -> Tuple[np.ndarray, np.ndarray]:
    edges = lo + step * np.arange(count + 1)
    return edges, 0.5 * (edges[:-1] + edges[1:])


def grid_transform(ft: FrenetTargets, v_ped: float, cfg: GridConfig = GridConfig()) -> DopplerGrid:
    if len(ft) < N_MIN:
        raise PreconditionError(f"grid needs at least {N_MIN} targets, got {len(ft)}")

    keep = np.abs(ft.n) <= cfg.n_limit
    d, n = ft.d[keep], ft.n[keep]
    delta = ft.v[keep] - v_ped

    # fixed raster centred on the data in d and on the path in n
    d_mid = 0.5 * (d.min() + d.max()) if len(d) else 0.0
    d_edges, d_centres = _axis(d_mid - 0.5 * cfg.cols * cfg.cell_d, cfg.cols, cfg.cell_d)
    n_edges, n_centres = _axis(-0.5 * cfg.rows * cfg.cell_n, cfg.rows, cfg.cell_n)

    two_s2 = 2.0 * cfg.smooth_sigma**2
    wd = np.exp(-((d[None, :] - d_centres[:, None]) ** 2) / two_s2)
    wn = np.exp(-((n[None, :] - n_centres[:, None]) ** 2) / two_s2)
    weight = wn @ wd.T
    total = (wn * delta) @ wd.T

    hits, _, _ = np.histogram2d(n, d, bins=(n_edges, d_edges))
    occupancy = (hits > 0) & (weight >= cfg.w_min)
    cells = np.zeros((cfg.rows, cfg.cols))
    cells[occupancy] = total[occupancy] / weight[occupancy]

    peak = np.abs(cells).max()
    if peak > 0:
        cells /= peak
    return DopplerGrid(
        cells=cells,
        occupancy=occupancy,
        cell_size=(cfg.cell_d, cfg.cell_n),
        extent=(float(d_edges[0]), float(d_edges[-1]), float(n_edges[0]), float(n_edges[-1])),
    )


def gradients(cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """[-1, 0, 1] masks along d (columns) and n (rows), replicate border"""
    p = np.pad(cells, 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def hog(grid: DopplerGrid | np.ndarray, bins: int = 9) -> np.ndarray:
    cells = grid.cells if isinstance(grid, DopplerGrid) else np.asarray(grid, dtype=float)
    if cells.ndim != 2 or min(cells.shape) < 3:
        raise PreconditionError(f"HOG needs a grid of at least 3x3 cells, got {cells.shape}")

    gx, gy = gradients(cells)
    magnitude = np.hypot(gx, gy).ravel()
    theta = np.mod(np.arctan2(gy, gx), np.pi).ravel()

    # bin b is centred at (b + 0.5) * pi / bins
    pos = theta / (np.pi / bins) - 0.5
    lower = np.floor(pos)
    frac = pos - lower
    b0 = lower.astype(int) % bins
    b1 = (b0 + 1) % bins
    hist = np.bincount(b0, weights=magnitude * (1 - frac), minlength=bins)
    hist += np.bincount(b1, weights=magnitude * frac, minlength=bins)

    total = hist.sum()
    if total <= 0:
        return np.full(bins, 1.0 / bins)
    return hist / total


def write_pgm(grid: DopplerGrid, path: Path) -> None:
    """grayscale dump, [-1, 1] mapped to [0, 255], rows from +n at the top"""
    pixels = np.round((np.clip(grid.cells, -1, 1) + 1) * 127.5).astype(np.uint8)[::-1]
    rows, cols = pixels.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
