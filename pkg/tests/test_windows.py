import numpy as np
import pytest

from errors import PreconditionError
from models import MotionClass, RadarTarget, TargetTable, TrackInfo
from windows import N_MIN, assemble_windows, sample_time_stats


def _table(t, track="a", v=1.0):
    t = np.asarray(t, dtype=float)
    return TargetTable(t=t, x=t, y=np.zeros_like(t), v=np.full_like(t, v), track=np.full(len(t), track, dtype=object))


class TestAssembleWindows:
    def test_window_count_on_long_track(self):
        windows = assemble_windows(_table(np.linspace(0.0, 45.0, 2501)), duration=3.0, hop=1.0)
        assert len(windows) == 43
        assert windows[0].start == 0.0
        assert windows[-1].start == pytest.approx(42.0)

    def test_short_track_still_gives_one_window(self):
        windows = assemble_windows(_table(np.linspace(0.0, 2.9, 200)))
        assert len(windows) == 1
        assert len(windows[0]) == 200

    def test_sparse_stream_is_dropped(self):
        windows = assemble_windows(_table(np.arange(0.0, 10.0, 1.0)))
        assert len(windows) == 0
        assert windows.dropped > 0

    def test_windows_are_half_open(self):
        t = np.r_[np.linspace(0.0, 2.99, 60), 3.0, np.linspace(3.01, 4.5, 40)]
        first = assemble_windows(_table(t), duration=3.0, hop=1.0)[0]
        assert first.t.max() < 3.0
        assert len(first) == 60

    def test_tracks_are_windowed_separately(self):
        table = TargetTable.concat([_table(np.linspace(0, 4.0, 150), "b"), _table(np.linspace(0, 4.0, 150), "a")])
        windows = assemble_windows(table)
        assert [w.track_id for w in windows] == ["a", "a", "b", "b"]

    def test_labels_come_from_the_manifest(self):
        tracks = {"a": TrackInfo(subject_id="s1", recording_id="r1", label=MotionClass.RUN)}
        w = assemble_windows(_table(np.linspace(0, 2.5, 50)), tracks=tracks)[0]
        assert w.label is MotionClass.RUN
        assert (w.subject_id, w.recording_id) == ("s1", "r1")

    def test_invalid_targets_are_rejected(self):
        t = np.linspace(0, 2.5, 50)
        table = TargetTable.concat([_table(t), _table([1.0], v=np.nan), _table([1.5], v=40.0)])
        windows = assemble_windows(table)
        assert windows.rejected == 2
        assert len(windows[0]) == 50

    def test_deterministic_under_input_order(self):
        table = _table(np.linspace(0, 8, 400))
        shuffled = table.take(np.random.default_rng(0).permutation(len(table)))
        a, b = assemble_windows(table), assemble_windows(shuffled)
        assert [w.key for w in a] == [w.key for w in b]
        for wa, wb in zip(a, b):
            np.testing.assert_array_equal(wa.t, wb.t)

    def test_accepts_target_records(self):
        targets = [RadarTarget(float(t), float(t), 0.0, 1.0, "a") for t in np.linspace(0, 2, N_MIN)]
        assert len(assemble_windows(targets)) == 1

    @pytest.mark.parametrize("duration,hop", [(0.0, 1.0), (3.0, 0.0), (3.0, 4.0)])
    def test_bad_window_parameters(self, duration, hop):
        with pytest.raises(PreconditionError):
            assemble_windows(_table(np.linspace(0, 3, 50)), duration=duration, hop=hop)

    def test_windows_are_read_only(self):
        w = assemble_windows(_table(np.linspace(0, 2.5, 50)))[0]
        with pytest.raises(ValueError):
            w.t[0] = 1.0


class TestSampleTimeStats:
    def test_uniform_spacing(self, make_window):
        w = make_window([0.0, 0.018, 0.036], [0, 0, 0], [0, 0, 0], [0, 0, 0])
        mean_dt, max_dt = sample_time_stats(w)
        assert mean_dt == pytest.approx(0.018)
        assert max_dt == pytest.approx(0.018)

    def test_uneven_spacing(self, make_window):
        w = make_window([0.0, 0.01, 0.05], [0, 0, 0], [0, 0, 0], [0, 0, 0])
        assert sample_time_stats(w) == pytest.approx((0.025, 0.04))

    def test_single_target(self, make_window):
        with pytest.raises(PreconditionError):
            sample_time_stats(make_window([0.0], [0], [0], [0]))
