import json

import numpy as np
import pytest

from src.default_constants import ALTERNATIVE_RHO_UPPER
from src.errors import ChainError, ConfigError, DataError
from src.gibbs import chain as chain_module
from src.gibbs.chain import GibbsChain, run_chain, initial_state
from src.gibbs.settings import PriorSpec, ConstraintSet, ChainConfig
from src.gibbs.state import summarize, write_summary
from src.gibbs.updates import ChainContext
from src.probkit.rng_stream import RngStream
from src.psmodel.algebra import pce_true
from src.psmodel.dataset import Dataset
from src.psmodel.presets import SETTING_5_STRATA
from src.psmodel.simulation import simulate


def short_config(n_iter=60, burn_in=20, thin=4, seed=5):
    config = ChainConfig()
    config.n_iter, config.burn_in, config.thin, config.seed = n_iter, burn_in, thin, seed
    return config.validate()


class TestRunChain:
    def test_draw_table_layout(self, setting5_data):
        posterior = run_chain(
            setting5_data, PriorSpec(), ConstraintSet(), short_config(), SETTING_5_STRATA
        )
        assert posterior.n_draws == 10
        assert list(posterior.draws.columns[:6]) == ["beta00", "beta01", "beta10", "beta11", "lambda0", "lambda1"]
        assert "pce(0.89,0.35)" in posterior.draws
        assert set(posterior.acceptance) == {"rho", "sigma2_s0", "sigma2_s1"}

    def test_pce_columns_follow_draws(self, setting5_data):
        posterior = run_chain(
            setting5_data, PriorSpec(), ConstraintSet(), short_config(), SETTING_5_STRATA[:1]
        )
        row = posterior.draws.iloc[3]
        u = SETTING_5_STRATA[0]
        expected = (row.beta10 - row.beta00) * u.s0 + (row.beta11 - row.beta01) * u.s1 + row.lambda1 - row.lambda0
        assert posterior.pce(u)[3] == pytest.approx(expected, rel=1e-12)

    def test_same_seed_same_draws(self, setting5_data):
        a = run_chain(setting5_data, PriorSpec(), ConstraintSet(), short_config())
        b = run_chain(setting5_data, PriorSpec(), ConstraintSet(), short_config())
        np.testing.assert_array_equal(a.draws.to_numpy(), b.draws.to_numpy())

    def test_streams_differ(self, setting5_data):
        config = short_config()
        a = run_chain(setting5_data, PriorSpec(), ConstraintSet(), config)
        b = run_chain(setting5_data, PriorSpec(), ConstraintSet(), config.with_stream(1))
        assert not np.array_equal(a.draws.to_numpy(), b.draws.to_numpy())

    def test_fixed_rho(self, setting5_data):
        constraints = ConstraintSet.from_regime("none", rho_fixed=0.4)
        posterior = run_chain(setting5_data, PriorSpec(), constraints, short_config())
        assert np.all(posterior.column("rho") == 0.4)
        assert "rho" not in posterior.acceptance

    @pytest.mark.parametrize("regime", ["none", "dominant", "same_sign_arm1", "zero_beta01", "two_constraints", "pi"])
    def test_default_settings_run(self, setting5_data, regime):
        config = ChainConfig.from_dict({"n_iter": 70, "burn_in": 10})
        for rho_fixed in (None, 0.75):
            constraints = ConstraintSet.from_regime(regime, rho_fixed=rho_fixed)
            posterior = run_chain(setting5_data, PriorSpec(), constraints, config, SETTING_5_STRATA)
            assert posterior.n_draws == 2
            assert np.all(np.isfinite(posterior.draws.to_numpy()))

    def test_rho_stays_in_prior_interval(self, setting5_data):
        prior = PriorSpec()
        prior.rho_interval = (0.2, 0.6)
        posterior = run_chain(setting5_data, prior, ConstraintSet(), short_config(n_iter=200, burn_in=0, thin=1))
        rho = posterior.column("rho")
        assert rho.min() >= 0.2 and rho.max() <= 0.6

    def test_narrower_rho_prior_from_config(self, setting5_data):
        prior = PriorSpec.from_dict({"rho_interval": [0.0, ALTERNATIVE_RHO_UPPER]})
        posterior = run_chain(setting5_data, prior, ConstraintSet(), short_config(n_iter=200, burn_in=0, thin=1))
        assert posterior.column("rho").max() <= ALTERNATIVE_RHO_UPPER

    def test_dominant_regime_floor(self, setting5_data):
        constraints = ConstraintSet.from_regime("dominant")
        posterior = run_chain(setting5_data, PriorSpec(), constraints, short_config())
        assert posterior.sigma_y2_floor > 0.05 * 200
        assert posterior.column("sigma_y2").min() >= posterior.sigma_y2_floor

    def test_summary_is_json(self, setting5_data, tmp_path):
        posterior = run_chain(setting5_data, PriorSpec(), ConstraintSet(), short_config(), SETTING_5_STRATA)
        path = tmp_path / "summary.json"
        write_summary(summarize(posterior), path)
        summary = json.loads(path.read_text())
        assert summary["n_draws"] == 10
        assert summary["config"]["regime"] == "none"
        assert set(summary["parameters"]["rho"]) == {"mean", "sd", "q2.5", "q97.5"}

    def test_draws_csv(self, setting5_data, tmp_path):
        posterior = run_chain(setting5_data, PriorSpec(), ConstraintSet(), short_config())
        path = tmp_path / "draws.csv"
        posterior.to_csv(path)
        assert path.read_text().splitlines()[0].startswith("beta00,beta01,beta10,beta11")


class TestInitialState:
    def test_respects_constraints(self, setting5_data):
        ctx = ChainContext.build(
            setting5_data, PriorSpec(), ConstraintSet.from_regime("two_constraints+sign_positive"), short_config()
        )
        state = initial_state(ctx)
        assert state.theta_y[1] == 0.0
        assert state.theta_y[0] == state.theta_y[2]
        assert state.theta_y[2] > 0
        assert state.sigma_y2 > ctx.sigma_y2_floor

    def test_start_is_near_least_squares(self, setting5_data):
        ctx = ChainContext.build(setting5_data, PriorSpec(), ConstraintSet(), short_config())
        state = initial_state(ctx)
        assert state.theta_s[:2] == pytest.approx([0.89, 0.70], abs=0.1)
        assert state.rho == pytest.approx(0.475)


class TestFailures:
    def test_step_failure_names_step(self, setting5_data, monkeypatch):
        def broken(state, ctx, rng):
            if state.iteration == 3:
                raise FloatingPointError("overflow")

        monkeypatch.setattr(chain_module, "GIBBS_STEPS", (("update_rho", broken),))
        with pytest.raises(ChainError) as info:
            run_chain(setting5_data, PriorSpec(), ConstraintSet(), short_config())
        assert info.value.step == "update_rho"
        assert info.value.iteration == 3

    def test_any_step_exception_is_wrapped(self, setting5_data, monkeypatch):
        def broken(state, ctx, rng):
            raise TypeError("unsupported operand")

        monkeypatch.setattr(chain_module, "GIBBS_STEPS", (("update_sigma_y2", broken),))
        with pytest.raises(ChainError, match="update_sigma_y2") as info:
            run_chain(setting5_data, PriorSpec(), ConstraintSet(), short_config())
        assert isinstance(info.value.cause, TypeError)
        assert info.value.iteration == 1

    def test_tiny_arm_rejected(self):
        data = Dataset([1.0, 2.0, 3.0, 4.0, 5.0], [0, 0, 1, 1, 1], [0.1, 0.4, 0.2, 0.3, 0.9])
        with pytest.raises(DataError):
            run_chain(data, PriorSpec(), ConstraintSet(), short_config())

    def test_invalid_config_rejected(self, setting5_data):
        config = short_config()
        config.thin = 0
        with pytest.raises(ConfigError):
            GibbsChain(setting5_data, PriorSpec(), ConstraintSet(), config)


@pytest.mark.slow
class TestRecovery:
    def test_pi_regime_recovers_truth(self, pi_truth):
        data = simulate(pi_truth, 1200, None, RngStream(77))
        posterior = run_chain(
            data, PriorSpec(), ConstraintSet.from_regime("pi"), short_config(4000, 1000, 5), SETTING_5_STRATA
        )
        assert posterior.column("beta11").mean() == pytest.approx(1.2, abs=0.15)
        for u in SETTING_5_STRATA:
            lo, hi = posterior.credible_interval(f"pce({u.s0:g},{u.s1:g})")
            assert lo <= pce_true(pi_truth, u) <= hi

    def test_rho_identified_under_two_constraints(self, rho_ident_data):
        prior = PriorSpec()
        prior.rho_interval = (-0.95, 0.95)
        posterior = run_chain(
            rho_ident_data, prior, ConstraintSet.from_regime("two_constraints"), short_config(6000, 2000, 5)
        )
        rho = posterior.column("rho")
        assert rho.mean() == pytest.approx(0.75, abs=0.15)
        lo, hi = posterior.credible_interval("rho")
        assert hi - lo < 0.6
