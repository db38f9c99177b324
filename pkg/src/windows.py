from typing import Iterable, Mapping, Optional, Tuple, Union

import numpy as np

from errors import PreconditionError
from models import MAX_ABS_DOPPLER, RadarTarget, TargetTable, TargetWindow, TrackInfo
from utils import logger

# minimum targets per window for a usable stride spectrum
N_MIN = 32

# guards the last hop against float round-off in t_last - t_first
_HOP_EPS = 1e-9


class WindowList(list):
    """A list of TargetWindow that also carries the assembly diagnostics."""

    def __init__(self, windows: Iterable[TargetWindow] = (), dropped: int = 0, rejected: int = 0):
        super().__init__(windows)
        self.dropped = dropped
        self.rejected = rejected


def _as_table(targets: Union[TargetTable, Iterable[RadarTarget]]) -> TargetTable:
    if isinstance(targets, TargetTable):
        return targets
    return TargetTable.from_targets(targets)


def valid_mask(table: TargetTable) -> np.ndarray:
    finite = np.isfinite(table.t) & np.isfinite(table.x) & np.isfinite(table.y) & np.isfinite(table.v)
    with np.errstate(invalid="ignore"):
        return finite & (np.abs(np.where(finite, table.v, 0.0)) <= MAX_ABS_DOPPLER)


def sort_targets(table: TargetTable) -> TargetTable:
    """orders by track, then t, ties broken by (x, y, v)"""
    _, track_code = np.unique(table.track.astype(str), return_inverse=True)
    order = np.lexsort((table.v, table.y, table.x, table.t, track_code))
    return table.take(order)


def assemble_windows(
    targets: Union[TargetTable, Iterable[RadarTarget]],
    duration: float = 3.0,
    hop: float = 1.0,
    n_min: int = N_MIN,
    tracks: Optional[Mapping[str, TrackInfo]] = None,
) -> WindowList:
    if duration <= 0:
        raise PreconditionError(f"window duration must be positive, got {duration}")
    if not 0 < hop <= duration:
        raise PreconditionError(f"hop must lie in (0, {duration}], got {hop}")

    table = _as_table(targets)
    if len(table) == 0:
        return WindowList()

    ok = valid_mask(table)
    rejected = int((~ok).sum())
    if rejected:
        logger.warning(f"rejected {rejected} of {len(table)} targets with non-finite or implausible fields")

    table = sort_targets(table.take(np.flatnonzero(ok)))
    windows = WindowList(rejected=rejected)
    if len(table) == 0:
        return windows

    track_ids = table.track.astype(str)
    boundaries = np.flatnonzero(track_ids[1:] != track_ids[:-1]) + 1
    for lo, hi in zip(np.r_[0, boundaries], np.r_[boundaries, len(table)]):
        track_id = track_ids[lo]
        info = tracks.get(track_id) if tracks else None
        t = table.t[lo:hi]
        t_first, span = t[0], t[-1] - t[0]
        n_hops = int(np.floor((span - duration) / hop + _HOP_EPS)) + 1 if span >= duration else 1

        for k in range(n_hops):
            start = t_first + k * hop
            a = lo + int(np.searchsorted(t, start, side="left"))
            b = lo + int(np.searchsorted(t, start + duration, side="left"))
            if b - a < n_min:
                windows.dropped += 1
                logger.debug(f"track {track_id}: window at {start:.3f}s has {b - a} targets, dropped")
                continue

            windows.append(
                TargetWindow(
                    track_id=track_id,
                    start=float(start),
                    duration=duration,
                    t=table.t[a:b],
                    x=table.x[a:b],
                    y=table.y[a:b],
                    v=table.v[a:b],
                    label=info.label if info else None,
                    subject_id=info.subject_id if info else None,
                    recording_id=info.recording_id if info else None,
                )
            )

    if windows.dropped:
        logger.info(f"assembled {len(windows)} windows, dropped {windows.dropped} below {n_min} targets")
    return windows


def sample_time_stats(w: TargetWindow) -> Tuple[float, float]:
    n = len(w.t)
    if n < 2:
        raise PreconditionError(f"sample time statistics need at least 2 targets, got {n}")
    return float((w.t[-1] - w.t[0]) / (n - 1)), float(np.diff(w.t).max())
