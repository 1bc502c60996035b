from math import inf

import numpy as np
import pytest

from src.asymvar.posterior_variance import (
    AsymVarInputs,
    posterior_var_approx,
    from_joint,
    describe,
    rate_fit,
    NOT_ESTIMABLE,
)


@pytest.fixture
def rho_ident_inputs(rho_ident_truth):
    return from_joint(rho_ident_truth, 0.5, 1200)


def test_value_at_rho_ident_truth(rho_ident_inputs):
    value = posterior_var_approx(rho_ident_inputs)
    assert value == pytest.approx(3.585e-4, rel=1e-3)
    assert np.sqrt(value) == pytest.approx(0.019, abs=5e-4)


def test_doubling_n_halves(rho_ident_inputs):
    a = posterior_var_approx(rho_ident_inputs)
    b = posterior_var_approx(rho_ident_inputs.with_n(2400))
    assert b == pytest.approx(a / 2, rel=1e-15)


def test_principal_ignorability_is_not_estimable(pi_truth):
    value = posterior_var_approx(from_joint(pi_truth, 0.5, 1200))
    assert value == inf
    assert describe(value) == NOT_ESTIMABLE
    assert describe(0.5) == 0.5


def test_arm_swap_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = AsymVarInputs(
            t_bar=rng.uniform(0.1, 0.9),
            beta10=rng.normal(),
            beta01=rng.normal(),
            sigma_s0=rng.uniform(0.5, 2),
            sigma_s1=rng.uniform(0.5, 2),
            sigma_y2=rng.uniform(0.1, 2),
            rho=rng.uniform(-0.9, 0.9),
            n=500,
        )
        b = AsymVarInputs(1 - a.t_bar, a.beta01, a.beta10, a.sigma_s1, a.sigma_s0, a.sigma_y2, a.rho, a.n)
        assert posterior_var_approx(a) == pytest.approx(posterior_var_approx(b), rel=1e-12)


def test_larger_violation_sharpens():
    values = [
        posterior_var_approx(AsymVarInputs(0.5, b, 0.0, 1.0, 1.0, 0.25, 0.0, 1000))
        for b in (0.2, 0.5, 1.0, 2.0)
    ]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        AsymVarInputs(1.0, 1.0, 0.0, 1.0, 1.0, 0.25, 0.5, 100)
    with pytest.raises(ValueError):
        AsymVarInputs(0.5, 1.0, 0.0, 1.0, 1.0, 0.25, 1.0, 100)


class TestRateFit:
    ns = [300, 600, 1200, 2400, 4800]

    def test_inverse_n(self):
        assert rate_fit(self.ns, [3.0 / n for n in self.ns]) == pytest.approx(-1.0, abs=1e-10)

    def test_inverse_n_squared(self):
        assert rate_fit(self.ns, [3.0 / n**2 for n in self.ns]) == pytest.approx(-2.0, abs=1e-10)

    def test_needs_three_points(self):
        with pytest.raises(ValueError, match="at least 3"):
            rate_fit([300, 600], [1.0, 0.5])

    def test_single_n(self):
        with pytest.raises(ValueError):
            rate_fit([300], [1.0])

    def test_nonpositive_variance(self):
        with pytest.raises(ValueError, match="positive"):
            rate_fit(self.ns[:3], [1.0, 0.0, 0.5])
