"""End-to-end checks on simulated recordings at evaluation scale."""

import numpy as np
import pytest

from bundle import ModelBundle, decode_bundle, encode_bundle
from config import PipelineConfig
from evaluation import evaluate_classification, evaluate_regression, group_keys, grouped_kfold
from features import extract_height, extract_motion, window_label
from gait_sim import SimConfig, SubjectSpec, default_scenario, simulate
from gait_spectrum import SpectrumConfig, stride_from_window
from models import MotionClass, Ok
from pipeline import BoulicBaseline, HeightPipeline, MotionPipeline
from sparse_dictionary import dictionary_predict_batch, train_dictionary
from trajectory import fit_trajectory, frenet_transform
from windows import assemble_windows

pytestmark = pytest.mark.slow


def _samples(specs, sim, cfg, extractor, task_key):
    samples = []
    for spec in specs:
        rec = simulate(spec, sim)
        windows = assemble_windows(rec.targets, tracks={spec.track_id: rec.track_info(task_key)})
        samples += [r.value for r in (extractor(w, cfg, 0) for w in windows) if isinstance(r, Ok)]
    return samples


@pytest.fixture(scope="module")
def height_samples():
    cfg = PipelineConfig()
    samples = _samples(default_scenario("height", 50, seed=21), SimConfig(duration=33.0), cfg, extract_height, "height")
    return cfg, samples


@pytest.fixture(scope="module")
def height_report(height_samples):
    cfg, samples = height_samples
    y = np.array([window_label(s.window) for s in samples])
    groups = group_keys([s.window for s in samples])
    plan = grouped_kfold(groups, 5, seed=0)
    forest = evaluate_regression(lambda: HeightPipeline(cfg), samples, y, groups, plan)
    baseline = evaluate_regression(BoulicBaseline, samples, y, groups, plan)
    return forest, baseline


@pytest.fixture(scope="module")
def motion_samples():
    cfg = PipelineConfig()
    samples = _samples(default_scenario("motion", 12, seed=22), SimConfig(duration=43.0), cfg, extract_motion, "motion")
    return cfg, samples


class TestStrideRecovery:
    def test_two_hundred_walk_windows(self):
        rng = np.random.default_rng(2024)
        errors = []
        for i in range(20):
            spec = SubjectSpec(
                height=float(rng.uniform(1.5, 2.0)),
                motion=MotionClass.WALK,
                speed=float(rng.uniform(0.8, 1.8)),
                seed=int(rng.integers(0, 2**32)),
                subject_id=f"w{i:02d}",
            )
            rec = simulate(spec, SimConfig(duration=13.0))
            for w in assemble_windows(rec.targets)[:10]:
                # any GaitError fails the test, so every window counts
                est = stride_from_window(frenet_transform(w, fit_trajectory(w), "track"), SpectrumConfig())
                errors.append(abs(est.l_s - rec.stride_length))
        errors = np.array(errors)
        assert len(errors) == 200
        assert np.mean(errors) <= 0.05
        assert np.mean(errors <= 0.10) >= 0.95


class TestHeightRegression:
    def test_forest_beats_the_model(self, height_samples, height_report):
        forest, baseline = height_report
        assert len(height_samples[1]) >= 0.95 * 50 * 30
        assert forest.mae <= 0.05
        assert forest.mae < baseline.mae

    def test_stride_ratio_feature_ranks_high(self, height_report):
        forest, _ = height_report
        ranked = sorted(forest.importances, key=forest.importances.get, reverse=True)
        assert "l^2/v" in ranked[:2]

    def test_bundle_keeps_predictions(self, height_samples):
        cfg, samples = height_samples
        y = np.array([window_label(s.window) for s in samples])
        pipeline = HeightPipeline(cfg).fit(samples, y, seed=3)
        loaded = decode_bundle(encode_bundle(ModelBundle.from_pipeline(pipeline))).to_pipeline()
        probe = samples[:100]
        np.testing.assert_array_equal(loaded.predict(probe), pipeline.predict(probe))


class TestMotionClassification:
    def test_macro_f1(self, motion_samples):
        cfg, samples = motion_samples
        y = np.array([window_label(s.window) for s in samples])
        groups = group_keys([s.window for s in samples])
        report = evaluate_classification(lambda: MotionPipeline(cfg), samples, y, groups, grouped_kfold(groups, 5, seed=0))
        assert report.macro_f1 >= 0.90
        np.testing.assert_allclose(report.row_normalized.sum(axis=1), 1.0, atol=1e-9)

    def test_bundle_keeps_predictions(self, motion_samples):
        cfg, samples = motion_samples
        probe = samples[::len(samples) // 100][:100]
        y = np.array([window_label(s.window) for s in samples])
        pipeline = MotionPipeline(cfg).fit(samples, y, seed=4)
        loaded = decode_bundle(encode_bundle(ModelBundle.from_pipeline(pipeline))).to_pipeline()
        np.testing.assert_array_equal(loaded.predict(probe), pipeline.predict(probe))
        assert loaded.dictionary_votes(probe) == pipeline.dictionary_votes(probe)

    def test_dictionaries_alone(self, motion_samples):
        cfg, samples = motion_samples
        held_out = {f"s{i:03d}" for i in range(8, 12)}
        train = [s for s in samples if s.window.subject_id not in held_out]
        test = [s for s in samples if s.window.subject_id in held_out]
        dictionaries = []
        for motion in MotionClass:
            images = np.array([s.image for s in train if window_label(s.window) == int(motion)])
            dictionaries.append(
                train_dictionary(images, cfg.dictionary.atoms, cfg.dictionary.lam, cfg.dictionary.epochs, motion=motion)
            )
        predicted, _, _ = dictionary_predict_batch(np.array([s.image for s in test]), dictionaries)
        truth = np.array([window_label(s.window) for s in test])
        hits = np.array([int(p) for p in predicted]) == truth
        accuracy = [hits[truth == int(m)].mean() for m in MotionClass]
        assert sum(a >= 0.8 for a in accuracy) >= 4
