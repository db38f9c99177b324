import numpy as np
import pytest

from gait_sim import SimConfig, SubjectSpec, simulate
from models import MotionClass, TargetWindow
from windows import assemble_windows


@pytest.fixture
def make_window():
    def _make(t, x, y, v, track_id="trk", label=None, subject_id=None, recording_id=None, start=None, duration=3.0):
        t = np.asarray(t, dtype=float)
        return TargetWindow(
            track_id=track_id,
            start=float(t[0]) if start is None else start,
            duration=duration,
            t=t,
            x=np.asarray(x, dtype=float),
            y=np.asarray(y, dtype=float),
            v=np.asarray(v, dtype=float),
            label=label,
            subject_id=subject_id,
            recording_id=recording_id,
        )

    return _make


@pytest.fixture
def line_window(make_window):
    """100 noiseless targets on x = 1.2 t, y = 0"""
    t = np.linspace(0.0, 2.97, 100)
    return make_window(t, 1.2 * t, np.zeros_like(t), np.full_like(t, 1.2))


@pytest.fixture(scope="session")
def walk_recording():
    spec = SubjectSpec(height=1.8, motion=MotionClass.WALK, speed=1.0, seed=11, subject_id="s1", recording_id="walk")
    return simulate(spec, SimConfig(duration=12.0))


@pytest.fixture(scope="session")
def walk_windows(walk_recording):
    info = {walk_recording.spec.track_id: walk_recording.track_info("height")}
    return assemble_windows(walk_recording.targets, tracks=info)
