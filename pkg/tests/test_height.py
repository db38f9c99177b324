import numpy as np
import pytest

from errors import OutOfRegime
from height import (
    BOULIC_STRIDE_COEFF,
    FEATURE_NAMES,
    THIGH_RATIO,
    HeightEstimate,
    boulic_height,
    boulic_stride_length,
    height_features,
)

K = BOULIC_STRIDE_COEFF**2 * THIGH_RATIO


class TestBoulicHeight:
    def test_known_stride(self):
        assert boulic_height(1.0, 1.31487).h == pytest.approx(1.8, abs=1e-3)

    def test_unit_height(self):
        assert boulic_height(1.0, np.sqrt(K)).h == pytest.approx(1.0, rel=1e-12)

    def test_doubling_stride_quadruples_height(self):
        assert boulic_height(1.3, 1.4).h == pytest.approx(4 * boulic_height(1.3, 0.7).h, rel=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for h, v in zip(rng.uniform(1.5, 2.0, 1000), rng.uniform(0.8, 1.8, 1000)):
            l = boulic_stride_length(h, v)
            assert boulic_height(v, l).h == pytest.approx(h, rel=1e-9)

    def test_algebraic_identity(self):
        rng = np.random.default_rng(1)
        for v, l in zip(rng.uniform(0.3, 3.0, 200), rng.uniform(0.2, 2.5, 200)):
            assert boulic_height(v, l).h * K * v == pytest.approx(l * l, abs=1e-12)

    @pytest.mark.parametrize("v,l", [(0.2, 1.0), (0.0, 1.0), (1.0, 0.0), (1.0, -0.5), (np.nan, 1.0)])
    def test_out_of_regime(self, v, l):
        with pytest.raises(OutOfRegime):
            boulic_height(v, l)

    def test_implausible_heights_are_flagged(self):
        assert not HeightEstimate(1.75).flagged
        assert HeightEstimate(2.8).flagged
        assert HeightEstimate(0.4).flagged


class TestHeightFeatures:
    def test_unity(self):
        np.testing.assert_array_equal(height_features(1.0, 1.0), np.ones(8))

    def test_direct_arithmetic(self):
        np.testing.assert_array_equal(height_features(2.0, 1.0), [2, 1, 2, 4, 2, 0.5, 0.25, 0.5])

    def test_names_match_features(self):
        assert len(FEATURE_NAMES) == len(height_features(1.2, 1.3))
        assert FEATURE_NAMES[7] == "l^2/v"

    def test_last_feature_is_the_height_model(self):
        v, l = 1.3, 1.45
        assert height_features(v, l)[7] == pytest.approx(boulic_height(v, l).h * BOULIC_STRIDE_COEFF**2 * THIGH_RATIO, rel=1e-12)

    def test_slow_walker_rejected(self):
        with pytest.raises(OutOfRegime):
            height_features(0.15, 1.0)
