import math

import numpy as np
import pytest
from scipy import stats

from src.errors import EmptyRegionError
from src.probkit.numerical_methods import mh_step, grid_sample, reflect
from src.probkit.rng_stream import RngStream, Interval

UNBOUNDED = Interval(-np.inf, np.inf)


def run_mh(log_density, start, proposal_sd, bounds, n_steps, seed):
    rng = RngStream(seed)
    values = np.empty(n_steps)
    accepted = 0
    x = start
    for i in range(n_steps):
        x, ok = mh_step(x, log_density, proposal_sd, bounds, rng)
        values[i] = x
        accepted += ok
    return values, accepted / n_steps


class TestReflect:
    @pytest.mark.parametrize(
        "x, expected",
        [(0.5, 0.5), (-0.2, 0.2), (1.3, 0.7), (2.4, 0.4), (-1.25, 0.75)],
    )
    def test_unit_interval(self, x, expected):
        assert reflect(x, Interval(0.0, 1.0)) == pytest.approx(expected)

    def test_half_line(self):
        assert reflect(-3.0, Interval(0.0, np.inf)) == 3.0
        assert reflect(5.0, Interval(-np.inf, 2.0)) == -1.0


class TestMhStep:
    def test_flat_target_always_accepts(self):
        _, rate = run_mh(lambda x: 0.0, 0.5, 0.3, Interval(0.0, 1.0), 2000, seed=1)
        assert rate == 1.0

    def test_standard_normal_target(self):
        values, _ = run_mh(lambda x: -0.5 * x * x, 0.0, 2.4, UNBOUNDED, 100_000, seed=2)
        assert values.var() == pytest.approx(1.0, abs=0.05)
        assert values.mean() == pytest.approx(0.0, abs=0.05)

    def test_reflection_keeps_value_in_bounds(self):
        bounds = Interval(0.0, 0.95)
        values, _ = run_mh(lambda x: 0.0, 0.94, 10.0, bounds, 5000, seed=3)
        assert np.all((values >= 0.0) & (values <= 0.95))

    def test_nan_proposal_is_rejected(self):
        rng = RngStream(4)
        log_density = lambda x: 0.0 if x == 0.25 else math.nan
        for _ in range(100):
            value, accepted = mh_step(0.25, log_density, 0.1, UNBOUNDED, rng)
            assert value == 0.25
            assert not accepted

    def test_same_stream_same_path(self):
        a, _ = run_mh(lambda x: -0.5 * x * x, 0.0, 1.0, UNBOUNDED, 500, seed=5)
        b, _ = run_mh(lambda x: -0.5 * x * x, 0.0, 1.0, UNBOUNDED, 500, seed=5)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("n_steps, tol", [(200_000, 0.015), pytest.param(1_000_000, 0.01, marks=pytest.mark.slow)])
    def test_three_state_occupancy(self, n_steps, tol):
        probs = np.array([0.2, 0.3, 0.5])
        log_density = lambda x: math.log(probs[min(int(x), 2)])
        values, _ = run_mh(log_density, 1.5, 1.0, Interval(0.0, 3.0), n_steps, seed=6)
        occupancy = np.bincount(np.minimum(values.astype(int), 2), minlength=3) / n_steps
        np.testing.assert_allclose(occupancy, probs, atol=tol)


class TestGridSample:
    def test_point_mass_target(self):
        grid = Interval(0.0, 1.0)
        value = grid_sample(lambda x: -1e7 * (x - 0.5) ** 2, grid, 11, RngStream(1))
        assert value == 0.5

    def test_uniform_target_is_flat(self):
        rng = RngStream(2)
        grid = Interval(0.0, 1.0)
        points = np.linspace(0.0, 1.0, 512)
        draws = np.array(
            [grid_sample(np.zeros_like, grid, 512, rng, vectorized=True) for _ in range(50_000)]
        )
        counts = np.bincount(np.searchsorted(points, draws), minlength=512)
        assert counts.sum() == 50_000
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_gaussian_target_mean(self):
        rng = RngStream(3)
        grid = Interval(0.0, 1.0)
        log_density = lambda x: -50 * (x - 0.4) ** 2
        draws = [grid_sample(log_density, grid, 512, rng, vectorized=True) for _ in range(20_000)]
        assert np.mean(draws) == pytest.approx(0.4, abs=0.01)

    def test_scalar_and_vectorized_agree(self):
        grid = Interval(-1.0, 2.0)
        log_density = lambda x: -((x - 0.3) ** 2)
        a = grid_sample(log_density, grid, 64, RngStream(4))
        b = grid_sample(log_density, grid, 64, RngStream(4), vectorized=True)
        assert a == b

    def test_all_zero_density_raises(self):
        with pytest.raises(EmptyRegionError):
            grid_sample(lambda x: -np.inf, Interval(0.0, 1.0), 16, RngStream(5))

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            grid_sample(lambda x: 0.0, Interval(0.0, 1.0), 1, RngStream(5))
