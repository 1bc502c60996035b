import numpy as np
import pytest

from src.errors import InfeasibleError
from src.probkit.rng_stream import RngStream
from src.psmodel.algebra import (
    marginalize,
    solve_joint,
    pce_true,
    pce_from_marginal,
    observed_loglik,
    feasible_sigma_y2_max,
)
from src.psmodel.params import PrincipalStratum
from src.psmodel.presets import SETTING_5_STRATA
from src.psmodel.simulation import simulate


def marginal_vector(marg):
    return np.concatenate([marg.mu_y_prime, marg.phi, marg.zeta, marg.psi, marg.sigma_s])


class TestMarginalize:
    def test_setting5_treated_arm(self, setting5_marginal):
        assert setting5_marginal.zeta[1] == pytest.approx(883.765625, rel=1e-12)
        assert setting5_marginal.psi[1] == pytest.approx(26.15625, rel=1e-12)

    def test_setting5_control_arm_conditional_variance(self, setting5_marginal):
        assert setting5_marginal.zeta[0] == pytest.approx(204.265625, rel=1e-12)
        assert setting5_marginal.var_y_given_s(0) == pytest.approx(196.0, rel=1e-12)

    def test_no_intermediate_effect(self, setting5):
        marg = marginalize(setting5.replace(beta0=(0.0, 0.0)))
        assert marg.zeta[0] == setting5.sigma_y2
        assert marg.psi[0] == 0.0

    def test_conditional_variance_identity(self, random_params):
        rng = np.random.default_rng(1)
        for _ in range(50):
            params = random_params(rng)
            marg = marginalize(params)
            for t in (0, 1):
                o = 1 - t
                expected = params.sigma_y2 + (1 - params.rho**2) * params.sigma_s(o) ** 2 * params.beta(t)[o] ** 2
                assert marg.var_y_given_s(t) == pytest.approx(expected, rel=1e-12)

    def test_at_x_folds_covariates_into_means(self, setting5):
        params = setting5.replace(gamma=(2.0,), alpha=(0.5,))
        marg = marginalize(params, at_x=np.array([1.0]))
        assert marg.phi[0] == pytest.approx(0.89 + 0.5)
        assert marg.gamma == ()
        base = marginalize(setting5)
        assert marg.mu_y_prime[0] == pytest.approx(base.mu_y_prime[0] + 2.0 + 11.5 * 0.5)


class TestSolveJoint:
    def test_recovers_setting5(self, setting5_marginal):
        params = solve_joint(setting5_marginal, 0.75, 196.0, (1, 1))
        assert params.beta01 == pytest.approx(0.0, abs=1e-9)
        assert params.beta10 == pytest.approx(11.5, rel=1e-9)
        assert params.beta1[1] == pytest.approx(96.0, rel=1e-9)
        assert params.lambda1 == pytest.approx(-0.5, rel=1e-9)
        assert params.beta0[0] == pytest.approx(11.5, rel=1e-9)

    def test_upper_boundary_zeroes_a_violation(self, setting5_marginal):
        params = solve_joint(setting5_marginal, 0.75, feasible_sigma_y2_max(setting5_marginal), (1, 1))
        assert min(abs(params.beta01), abs(params.beta10)) == 0.0

    def test_infeasible_sigma_y2(self, setting5_marginal):
        with pytest.raises(InfeasibleError):
            solve_joint(setting5_marginal, 0.75, 197.0, (1, 1))

    def test_bad_rho(self, setting5_marginal):
        with pytest.raises(InfeasibleError):
            solve_joint(setting5_marginal, 1.0, 100.0, (1, 1))

    def test_round_trip(self, random_params):
        rng = np.random.default_rng(2)
        for _ in range(200):
            marg = marginalize(random_params(rng))
            rho = rng.uniform(-0.95, 0.95)
            sigma_y2 = rng.uniform(0.0, feasible_sigma_y2_max(marg))
            signs = tuple(rng.choice([-1, 1], 2))
            again = marginalize(solve_joint(marg, rho, sigma_y2, signs))
            expected = marginal_vector(marg)
            np.testing.assert_allclose(
                marginal_vector(again), expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max()
            )

    def test_likelihood_equivalence(self, random_params):
        rng = np.random.default_rng(3)
        truth = random_params(rng)
        data = simulate(truth, 400, None, RngStream(3))
        marg = marginalize(truth)
        top = feasible_sigma_y2_max(marg)
        a = solve_joint(marg, 0.3, 0.2 * top, (1, -1))
        b = solve_joint(marg, -0.6, 0.9 * top, (-1, 1))
        reference = observed_loglik(truth, data)
        assert observed_loglik(a, data) == pytest.approx(reference, rel=1e-9)
        assert observed_loglik(b, data) == pytest.approx(reference, rel=1e-9)


class TestPce:
    @pytest.mark.parametrize("stratum, expected", zip(SETTING_5_STRATA, (17.28, 33.6, 49.92)))
    def test_setting5_truth(self, setting5, stratum, expected):
        assert pce_true(setting5, stratum) == pytest.approx(expected, rel=1e-12)

    def test_identical_arms(self, setting5):
        params = setting5.replace(beta1=setting5.beta0)
        assert pce_true(params, PrincipalStratum(0.3, -1.2)) == 0.0

    def test_from_marginal_at_truth(self, setting5_marginal):
        value = pce_from_marginal(setting5_marginal, 0.75, 0.0, 11.5, PrincipalStratum(0.89, 0.35))
        assert value == pytest.approx(33.6, rel=1e-9)

    def test_centering_point(self, setting5_marginal):
        m = setting5_marginal
        u = PrincipalStratum(*m.phi)
        expected = m.mu_y_prime[1] - m.mu_y_prime[0]
        for beta01, beta10 in [(0.0, 11.5), (40.0, -3.0), (-84.0, 80.0)]:
            assert pce_from_marginal(m, 0.75, beta01, beta10, u) == pytest.approx(expected, rel=1e-12)

    def test_substitution_identity(self, random_params):
        rng = np.random.default_rng(4)
        for _ in range(100):
            marg = marginalize(random_params(rng))
            rho = rng.uniform(-0.9, 0.9)
            params = solve_joint(marg, rho, rng.uniform(0, feasible_sigma_y2_max(marg)), (1, -1))
            u = PrincipalStratum(*rng.normal(size=2))
            direct = pce_true(params, u)
            via_marginal = pce_from_marginal(marg, rho, params.beta01, params.beta10, u)
            assert via_marginal == pytest.approx(direct, rel=1e-9, abs=1e-9)

    def test_matches_simulated_potential_outcomes(self, setting5):
        rng = np.random.default_rng(5)
        n = 100_000
        u = rng.multivariate_normal(setting5.strata_mean(), setting5.strata_cov(), n)
        noise = setting5.sigma_y * rng.standard_normal((n, 2))
        y0 = setting5.lambda0 + u @ np.array(setting5.beta0) + noise[:, 0]
        y1 = setting5.lambda1 + u @ np.array(setting5.beta1) + noise[:, 1]
        in_bin = (np.abs(u[:, 0] - 0.89) < 0.05) & (np.abs(u[:, 1] - 0.52) < 0.05)
        effects = (y1 - y0)[in_bin]
        expected = np.mean([pce_true(setting5, PrincipalStratum(a, b)) for a, b in u[in_bin]])
        se = effects.std(ddof=1) / np.sqrt(in_bin.sum())
        assert abs(effects.mean() - expected) < 3 * se
