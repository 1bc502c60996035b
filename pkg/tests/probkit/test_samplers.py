import numpy as np
import pytest
from scipy import stats

from src.errors import DecompositionError, TruncationMassError
from src.probkit.rng_stream import RngStream
from src.probkit.samplers import (
    sample_mvn,
    sample_mvn_precision,
    sample_trunc_normal,
    sample_trunc_invgamma,
    sample_dirichlet,
)


def draws_of(sampler, n):
    return np.array([sampler() for _ in range(n)])


class TestSampleMvn:
    def test_same_seed_same_draw(self):
        a = sample_mvn([0.0, 0.0], np.eye(2), RngStream(7, 1))
        b = sample_mvn([0.0, 0.0], np.eye(2), RngStream(7, 1))
        np.testing.assert_array_equal(a, b)

    def test_singular_covariance_raises(self):
        with pytest.raises(DecompositionError):
            sample_mvn([1.0, 2.0], np.diag([0.0, 1.0]), RngStream(1))

    def test_correlation(self):
        rng = RngStream(11)
        cov = np.array([[1.0, 0.9], [0.9, 1.0]])
        draws = draws_of(lambda: sample_mvn([0.0, 0.0], cov, rng), 20_000)
        assert draws.shape == (20_000, 2)
        assert np.corrcoef(draws.T)[0, 1] == pytest.approx(0.9, abs=0.02)

    def test_precision_form_matches_covariance_form(self):
        rng = RngStream(3)
        precision = np.array([[4.0, 1.0], [1.0, 2.0]])
        linear = np.array([1.0, -1.0])
        draws = draws_of(lambda: sample_mvn_precision(linear, precision, rng)[0], 20_000)
        cov = np.linalg.inv(precision)
        np.testing.assert_allclose(draws.mean(axis=0), cov @ linear, atol=0.02)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


class TestSampleTruncNormal:
    def test_half_normal_mean(self):
        rng = RngStream(5)
        draws = draws_of(lambda: sample_trunc_normal(0.0, 1.0, 0.0, np.inf, rng), 100_000)
        assert draws.min() >= 0.0
        assert draws.mean() == pytest.approx(np.sqrt(2 / np.pi), abs=0.01)

    def test_tiny_interval_around_mean(self):
        rng = RngStream(5)
        lo, hi = 0.3 - 1e-9, 0.3 + 1e-9
        draws = draws_of(lambda: sample_trunc_normal(0.3, 1.0, lo, hi, rng), 1000)
        assert np.all((draws >= lo) & (draws <= hi))

    def test_no_truncation_is_plain_normal(self):
        rng = RngStream(9)
        draws = draws_of(lambda: sample_trunc_normal(5.0, 1.0, -np.inf, np.inf, rng), 100_000)
        assert draws.mean() == pytest.approx(5.0, abs=0.02)

    def test_far_tail(self):
        rng = RngStream(2)
        draws = draws_of(lambda: sample_trunc_normal(0.0, 1.0, 10.0, np.inf, rng), 2000)
        assert draws.min() >= 10.0
        assert draws.mean() == pytest.approx(10.098, abs=0.01)

    def test_far_lower_tail(self):
        rng = RngStream(2)
        draws = draws_of(lambda: sample_trunc_normal(3.0, 0.01, -np.inf, 1.0, rng), 2000)
        assert draws.max() <= 1.0

    def test_two_sided_distribution(self):
        rng = RngStream(4)
        mean, var, lo, hi = 0.3, 2.0, -1.0, 0.5
        draws = draws_of(lambda: sample_trunc_normal(mean, var, lo, hi, rng), 5000)
        sd = np.sqrt(var)
        reference = stats.truncnorm((lo - mean) / sd, (hi - mean) / sd, loc=mean, scale=sd)
        assert stats.kstest(draws, reference.cdf).pvalue > 1e-3

    def test_no_mass_raises(self):
        with pytest.raises(TruncationMassError):
            sample_trunc_normal(0.0, 1.0, 40.0, np.inf, RngStream(1))

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            sample_trunc_normal(0.0, 1.0, 1.0, 1.0, RngStream(1))

    @pytest.mark.slow
    def test_support_containment_many_draws(self):
        rng = RngStream(12)
        draws = draws_of(lambda: sample_trunc_normal(-2.0, 0.5, 0.0, 0.1, rng), 1_000_000)
        assert np.all((draws >= 0.0) & (draws <= 0.1))


class TestSampleTruncInvgamma:
    def test_untruncated_mean(self):
        rng = RngStream(21)
        draws = draws_of(lambda: sample_trunc_invgamma(3.0, 2.0, 0.0, rng), 100_000)
        assert draws.mean() == pytest.approx(1.0, abs=0.02)

    def test_truncated_support_and_shape(self):
        rng = RngStream(22)
        draws = draws_of(lambda: sample_trunc_invgamma(3.0, 2.0, 10.0, rng), 5000)
        assert draws.min() >= 10.0
        reference = stats.invgamma(3.0, scale=2.0)
        tail = reference.sf(10.0)
        truncated_cdf = lambda x: (reference.cdf(x) - reference.cdf(10.0)) / tail
        assert stats.kstest(draws, truncated_cdf).pvalue > 1e-3

    def test_mild_truncation_uses_rejection(self):
        rng = RngStream(23)
        draws = draws_of(lambda: sample_trunc_invgamma(5.0, 4.0, 0.5, rng), 5000)
        assert draws.min() >= 0.5

    def test_vague_prior_draws_are_valid(self):
        rng = RngStream(24)
        draws = draws_of(lambda: sample_trunc_invgamma(1e-3, 1e-3, 0.0, rng), 10_000)
        assert not np.any(np.isnan(draws))
        assert np.all(np.isfinite(draws))
        assert np.all(draws > 0)

    def test_underflow_raises(self):
        with pytest.raises(TruncationMassError):
            sample_trunc_invgamma(500.0, 1.0, 1e6, RngStream(1))


class TestSampleDirichlet:
    def test_uniform_simplex(self):
        rng = RngStream(31)
        draws = draws_of(lambda: sample_dirichlet([1.0, 1.0, 1.0], rng), 100_000)
        np.testing.assert_allclose(draws.mean(axis=0), [1 / 3] * 3, atol=0.01)
        np.testing.assert_allclose(draws.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(draws > 0)

    @pytest.mark.parametrize(
        "alphas, means",
        [
            ((100.0, 1.0, 1.0), (100 / 102, 1 / 102, 1 / 102)),
            ((2.0, 3.0, 5.0), (0.2, 0.3, 0.5)),
        ],
    )
    def test_component_means(self, alphas, means):
        rng = RngStream(32)
        draws = draws_of(lambda: sample_dirichlet(alphas, rng), 20_000)
        np.testing.assert_allclose(draws.mean(axis=0), means, atol=0.01)

    def test_nonpositive_concentration_rejected(self):
        with pytest.raises(ValueError):
            sample_dirichlet([1.0, 0.0, 1.0], RngStream(1))
