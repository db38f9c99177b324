import numpy as np
import pytest

from errors import PreconditionError
from gait_spectrum import (
    ResampledSignal,
    Spectrum,
    SpectrumConfig,
    extract_stride,
    gaussian_weighted_mean,
    resample_gaussian,
    spectrum,
    stride_from_window,
)
from trajectory import FrenetTargets, fit_trajectory, frenet_transform


def _frenet(d, v):
    d = np.asarray(d, dtype=float)
    return FrenetTargets(d=d, n=np.zeros_like(d), v=np.asarray(v, dtype=float), t=np.arange(len(d), dtype=float))


def _brute_force_mean(d, v, grid, sigma, truncate=6.0):
    out = []
    for g in grid:
        num = den = 0.0
        for di, vi in zip(d, v):
            z = (di - g) / sigma
            if abs(z) <= truncate:
                w = np.exp(-0.5 * z * z)
                num += w * vi
                den += w
        out.append(num / den)
    return np.array(out)


class TestResampleGaussian:
    def test_constant_signal(self):
        rng = np.random.default_rng(0)
        rs = resample_gaussian(_frenet(np.sort(rng.uniform(0, 4, 300)), np.ones(300)))
        np.testing.assert_allclose(rs.values, 1.0)
        assert len(rs) == int(np.floor((rs.abscissae[-1] - rs.d0) / 0.1 + 0.5)) + 1

    def test_single_point_weight_cancels(self):
        values, total = gaussian_weighted_mean(np.array([0.0]), np.array([2.0]), np.array([0.0]), 0.03)
        assert values[0] == 2.0
        assert total[0] == 1.0

    def test_vanishing_sigma_returns_the_sample(self):
        d = np.array([0.0, 0.1, 0.2])
        v = np.array([1.0, 5.0, -2.0])
        values, _ = gaussian_weighted_mean(d, v, d, 1e-4)
        np.testing.assert_allclose(values, v)

    def test_far_grid_point_is_a_hole(self):
        values, total = gaussian_weighted_mean(np.array([0.0]), np.array([1.0]), np.array([0.0, 1.0]), 0.03)
        assert values[0] == 1.0
        assert np.isnan(values[1])
        assert total[1] < 1e-12

    def test_sine_matches_analytic_and_brute_force(self):
        rng = np.random.default_rng(7)
        d = np.sort(np.linspace(0, 6, 500) + rng.uniform(-0.005, 0.005, 500))
        v = np.sin(2 * np.pi * 1.25 * d)
        rs = resample_gaussian(_frenet(d, v), delta_d=0.1, sigma=0.03)
        assert rs.holes == 0
        np.testing.assert_allclose(rs.values, _brute_force_mean(d, v, rs.abscissae, 0.03), atol=1e-12)
        # one-sided kernels bias the first and last grid points
        inner = (rs.abscissae > 0.2) & (rs.abscissae < 5.8)
        err = rs.values[inner] - np.sin(2 * np.pi * 1.25 * rs.abscissae[inner])
        assert np.max(np.abs(err)) < 0.05

    def test_holes_are_interpolated(self):
        d = np.r_[np.linspace(0, 1, 40), np.linspace(2, 3, 40)]
        rs = resample_gaussian(_frenet(d, np.r_[np.zeros(40), np.ones(40)]))
        assert rs.holes > 0
        assert np.all(np.isfinite(rs.values))
        assert np.all(np.diff(rs.values) >= -1e-12)

    def test_too_few_points(self):
        with pytest.raises(PreconditionError):
            resample_gaussian(_frenet(np.linspace(0, 3, 10), np.ones(10)))

    def test_too_short_path(self):
        with pytest.raises(PreconditionError):
            resample_gaussian(_frenet(np.linspace(0, 0.5, 100), np.ones(100)))


class TestSpectrum:
    def test_zero_signal(self):
        sp = spectrum(ResampledSignal(0.0, 0.1, np.zeros(60)))
        assert not sp.magnitudes.any()

    def test_cosine_on_a_bin(self):
        j = np.arange(64)
        sp = spectrum(ResampledSignal(0.0, 0.1, np.cos(2 * np.pi * 5 * j / 64)), pad_to=64, window="rect")
        assert list(np.flatnonzero(sp.magnitudes > 1e-9)) == [5]
        assert sp.magnitudes[5] == pytest.approx(32.0)

    def test_peak_of_padded_sine(self):
        d = 0.1 * np.arange(60)
        sp = spectrum(ResampledSignal(0.0, 0.1, np.sin(2 * np.pi * 1.25 * d)), pad_to=4096)
        assert sp.bin_width == pytest.approx(1 / 409.6)
        assert abs(sp.freqs[np.argmax(sp.magnitudes)] - 1.25) <= sp.bin_width

    def test_mean_removal_kills_dc(self):
        sp = spectrum(ResampledSignal(0.0, 0.1, np.full(60, 1.3)), remove_mean=True)
        np.testing.assert_allclose(sp.magnitudes, 0.0, atol=1e-12)

    @pytest.mark.parametrize("pad_to", [32, 3000])
    def test_bad_padding(self, pad_to):
        with pytest.raises(PreconditionError):
            spectrum(ResampledSignal(0.0, 0.1, np.zeros(60)), pad_to=pad_to)


class TestExtractStride:
    def test_tie_goes_to_lower_frequency(self):
        freqs = np.arange(0.0, 3.0, 0.1)
        mags = np.zeros_like(freqs)
        mags[[12, 18]] = 5.0
        est = extract_stride(Spectrum(freqs, mags), interpolate=False)
        assert est.f_step == pytest.approx(1.2)
        assert est.l_step == pytest.approx(1 / 1.2)
        assert est.l_s == pytest.approx(2 / 1.2)

    def test_interpolation_stays_within_half_a_bin(self):
        freqs = np.arange(0.0, 3.0, 0.1)
        mags = np.zeros_like(freqs)
        mags[14], mags[15], mags[16] = 2.0, 4.0, 3.9
        est = extract_stride(Spectrum(freqs, mags))
        assert 1.5 < est.f_step <= 1.55
        assert est.peak_magnitude >= 4.0

    def test_white_noise_is_low_confidence(self):
        flagged = 0
        for seed in range(100):
            noise = np.random.default_rng(seed).normal(size=60)
            sp = spectrum(ResampledSignal(0.0, 0.1, noise), remove_mean=True)
            flagged += extract_stride(sp).low_confidence
        assert flagged >= 95

    def test_clear_sine_is_confident(self):
        rng = np.random.default_rng(5)
        for f in (0.9, 1.25, 1.8, 2.3):
            values = np.sin(2 * np.pi * f * 0.1 * np.arange(60)) + 0.3 * rng.normal(size=60)
            sp = spectrum(ResampledSignal(0.0, 0.1, values), remove_mean=True)
            assert sp.resolution == pytest.approx(1 / 6.0)
            est = extract_stride(sp)
            assert not est.low_confidence
            assert est.f_step == pytest.approx(f, abs=sp.resolution / 2)

    def test_scaling_doppler_keeps_the_stride(self):
        rng = np.random.default_rng(3)
        values = np.sin(2 * np.pi * 1.5 * 0.1 * np.arange(60)) + 0.2 * rng.normal(size=60)
        a = spectrum(ResampledSignal(0.0, 0.1, values))
        b = spectrum(ResampledSignal(0.0, 0.1, 3.5 * values))
        np.testing.assert_allclose(b.magnitudes, 3.5 * a.magnitudes, rtol=1e-12, atol=1e-12)
        assert extract_stride(a).f_step == pytest.approx(extract_stride(b).f_step, abs=1e-12)

    def test_empty_band(self):
        sp = Spectrum(np.arange(0.0, 3.0, 0.1), np.ones(30))
        with pytest.raises(PreconditionError):
            extract_stride(sp, band=(5.0, 6.0))


class TestStrideFromWindow:
    def test_simulated_walker(self, walk_recording, walk_windows):
        errors = []
        for w in walk_windows:
            est = stride_from_window(frenet_transform(w, fit_trajectory(w), "track"), SpectrumConfig())
            errors.append(abs(est.l_s - walk_recording.stride_length))
        assert np.median(errors) <= 0.05
