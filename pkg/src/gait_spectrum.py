"""Stride length from the Doppler-over-distance signal of one window.

Three steps: Gaussian-kernel resampling onto a uniform distance grid, Hann
window with zero padding and FFT, then the strongest peak inside the step
frequency band.
"""

from dataclasses import asdict, dataclass
from typing import Literal, Tuple

import numpy as np
from scipy.signal import windows as signal_windows

from errors import PreconditionError
from trajectory import FrenetTargets
from windows import N_MIN

MIN_SAMPLES = 16
# below this kernel weight a grid point counts as a coverage hole
_MIN_WEIGHT = 1e-12


@dataclass(frozen=True)
class SpectrumConfig:
    delta_d: float = 0.1
    sigma: float = 0.03
    truncate_sigmas: float = 6.0
    pad_to: int = 4096
    f_min: float = 0.8
    f_max: float = 2.5
    interpolate_peak: bool = True
    remove_mean: bool = True
    low_confidence_ratio: float = 3.0

    @property
    def band(self) -> Tuple[float, float]:
        return (self.f_min, self.f_max)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ResampledSignal:
    d0: float
    delta_d: float
    values: np.ndarray
    holes: int = 0

    def __len__(self) -> int:
        return len(self.values)

    @property
    def abscissae(self) -> np.ndarray:
        return self.d0 + self.delta_d * np.arange(len(self.values))


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    magnitudes: np.ndarray
    # natural cell width 1/(M·Δd) of the unpadded signal; 0 when unknown
    resolution: float = 0.0

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass(frozen=True)
class StrideEstimate:
    f_step: float
    peak_magnitude: float
    band: Tuple[float, float]
    low_confidence: bool = False

    @property
    def l_step(self) -> float:
        return 1.0 / self.f_step

    @property
    def l_s(self) -> float:
        return 2.0 / self.f_step


def gaussian_weights(d: np.ndarray, grid: np.ndarray, sigma: float, truncate: float = 6.0) -> np.ndarray:
    """kernel matrix F(d_i | grid_j), grid points as rows"""
    z = (np.asarray(d)[None, :] - np.asarray(grid)[:, None]) / sigma
    w = np.exp(-0.5 * z * z)
    w[np.abs(z) > truncate] = 0.0
    return w


def gaussian_weighted_mean(
    d: np.ndarray, v: np.ndarray, grid: np.ndarray, sigma: float, truncate: float = 6.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    returns (values, weight sums); values are NaN where the weight sum falls
    below the hole threshold
    """
    w = gaussian_weights(d, grid, sigma, truncate)
    total = w.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = (w @ np.asarray(v, dtype=float)) / total
    values[total < _MIN_WEIGHT] = np.nan
    return values, total


def resample_gaussian(
    ft: FrenetTargets, delta_d: float = 0.1, sigma: float = 0.03, truncate: float = 6.0
) -> ResampledSignal:
    if len(ft) < N_MIN:
        raise PreconditionError(f"resampling needs at least {N_MIN} targets, got {len(ft)}")
    if delta_d <= 0 or sigma <= 0:
        raise PreconditionError("delta_d and sigma must be positive")
    d_min, d_max = float(np.min(ft.d)), float(np.max(ft.d))
    if d_max - d_min < 10 * delta_d:
        raise PreconditionError(f"path span {d_max - d_min:.3f} m is shorter than {10 * delta_d:.3f} m")

    m = int(np.floor((d_max - d_min) / delta_d)) + 1
    grid = d_min + delta_d * np.arange(m)
    values, _ = gaussian_weighted_mean(ft.d, ft.v, grid, sigma, truncate)

    holes = np.isnan(values)
    n_holes = int(holes.sum())
    if n_holes:
        valid = np.flatnonzero(~holes)
        if len(valid) == 0:
            raise PreconditionError("no grid point has kernel support")
        values[holes] = np.interp(np.flatnonzero(holes), valid, values[valid])
    return ResampledSignal(d0=d_min, delta_d=delta_d, values=values, holes=n_holes)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def spectrum(
    rs: ResampledSignal,
    pad_to: int = 4096,
    window: Literal["hann", "rect"] = "hann",
    remove_mean: bool = False,
) -> Spectrum:
    m = len(rs)
    if m < MIN_SAMPLES:
        raise PreconditionError(f"spectrum needs at least {MIN_SAMPLES} samples, got {m}")
    if pad_to < m or not _is_power_of_two(pad_to):
        raise PreconditionError(f"pad_to must be a power of two >= {m}, got {pad_to}")

    values = np.asarray(rs.values, dtype=float)
    if remove_mean:
        values = values - values.mean()
    if window == "hann":
        values = values * signal_windows.hann(m, sym=True)

    magnitudes = np.abs(np.fft.rfft(values, n=pad_to))
    freqs = np.fft.rfftfreq(pad_to, d=rs.delta_d)
    return Spectrum(freqs=freqs, magnitudes=magnitudes, resolution=1.0 / (m * rs.delta_d))


def cell_smoothed(sp: Spectrum) -> np.ndarray:
    """magnitudes with power box-averaged over ±1 natural cell"""
    mags = np.asarray(sp.magnitudes, dtype=float)
    if sp.resolution <= 0 or len(mags) < 2:
        return mags
    half = int(round(sp.resolution / sp.bin_width))
    if half < 1:
        return mags
    kernel = np.full(2 * half + 1, 1.0 / (2 * half + 1))
    return np.sqrt(np.convolve(mags * mags, kernel, mode="same"))


def extract_stride(
    sp: Spectrum,
    band: Tuple[float, float] = (0.8, 2.5),
    interpolate: bool = True,
    low_confidence_ratio: float = 3.0,
) -> StrideEstimate:
    f_min, f_max = band
    if not 0 < f_min <= f_max:
        raise PreconditionError(f"invalid band {band}")
    in_band = np.flatnonzero((sp.freqs >= f_min) & (sp.freqs <= f_max))
    if len(in_band) == 0:
        raise PreconditionError(f"band {band} contains no spectrum bin")

    mags = sp.magnitudes
    # np.argmax keeps the first maximum, the lowest frequency
    k = int(in_band[np.argmax(mags[in_band])])
    f_step, peak = float(sp.freqs[k]), float(mags[k])

    if interpolate and 0 < k < len(mags) - 1:
        alpha, beta, gamma = mags[k - 1], mags[k], mags[k + 1]
        denom = alpha - 2 * beta + gamma
        if denom < 0:
            shift = float(np.clip(0.5 * (alpha - gamma) / denom, -0.5, 0.5))
            f_step = float(np.clip(f_step + shift * sp.bin_width, f_min, f_max))
            peak = float(beta - 0.25 * (alpha - gamma) * shift)

    if f_step <= 0:
        raise PreconditionError("step frequency must be positive")
    # zero padding interpolates the spectrum, so confidence compares power
    # averaged over one natural cell on either side
    smoothed = cell_smoothed(sp)
    median = float(np.median(smoothed[in_band]))
    return StrideEstimate(
        f_step=f_step,
        peak_magnitude=peak,
        band=(f_min, f_max),
        low_confidence=bool(smoothed[k] < low_confidence_ratio * median),
    )


def stride_from_window(ft: FrenetTargets, cfg: SpectrumConfig = SpectrumConfig()) -> StrideEstimate:
    rs = resample_gaussian(ft, cfg.delta_d, cfg.sigma, cfg.truncate_sigmas)
    sp = spectrum(rs, cfg.pad_to, remove_mean=cfg.remove_mean)
    return extract_stride(sp, cfg.band, cfg.interpolate_peak, cfg.low_confidence_ratio)
