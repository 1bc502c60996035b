import numpy as np
import pytest

from src.probkit.rng_stream import RngStream
from src.psmodel.simulation import simulate, standard_normal_covariates


class TestSimulate:
    def test_strata_moments(self, setting5):
        data = simulate(setting5, 100_000, None, RngStream(1))
        assert data.s1.mean() == pytest.approx(0.70, abs=0.003)
        assert np.corrcoef(data.s0, data.s1)[0, 1] == pytest.approx(0.75, abs=0.01)
        assert data.has_truth and not data.has_covariates

    def test_observed_intermediate_follows_treatment(self, setting5_data):
        d = setting5_data
        np.testing.assert_array_equal(d.s, np.where(d.t == 1, d.s1, d.s0))

    def test_degenerate_noise(self, setting5):
        params = setting5.replace(beta0=(0.0, 0.0), beta1=(0.0, 0.0), lambda0=2.5, lambda1=2.5, sigma_y2=1e-30)
        data = simulate(params, 50, None, RngStream(2))
        np.testing.assert_allclose(data.y, 2.5, atol=1e-12)

    def test_balanced_assignment(self, setting5):
        data = simulate(setting5, 20_000, None, RngStream(3))
        assert data.t.mean() == pytest.approx(0.5, abs=0.02)

    def test_same_seed_same_data(self, setting5):
        a = simulate(setting5, 100, None, RngStream(4, 2))
        b = simulate(setting5, 100, None, RngStream(4, 2))
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.t, b.t)

    def test_covariates_shift_strata(self, setting5):
        params = setting5.replace(gamma=(0.0,), alpha=(1.0,))
        data = simulate(params, 20_000, standard_normal_covariates(1), RngStream(5))
        slope = np.polyfit(data.x[:, 0], data.s0, 1)[0]
        assert slope == pytest.approx(1.0, abs=0.02)

    def test_covariate_generator_required(self, setting5):
        with pytest.raises(ValueError):
            simulate(setting5.replace(gamma=(1.0,), alpha=(1.0,)), 10, None, RngStream(6))

    def test_sample_size_positive(self, setting5):
        with pytest.raises(ValueError):
            simulate(setting5, 0, None, RngStream(6))
