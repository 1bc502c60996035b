import logging
from typing import Iterator, List, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.default_constants import SIGN_CONSTRAINT_START
from src.errors import ChainError, DataError
from src.math_functions import least_squares
from src.probkit.rng_stream import RngStream
from src.psmodel.algebra import pce_true
from src.psmodel.dataset import Dataset
from src.psmodel.params import PrincipalStratum
from src.gibbs.settings import PriorSpec, ConstraintSet, ChainConfig
from src.gibbs.state import ChainState, PosteriorDraws, pce_column
from src.gibbs.updates import ChainContext, GIBBS_STEPS

log = logging.getLogger(__name__)

# log a progress line this often
DEBUG_EVERY = 1000


def project_theta_y(theta_y: np.ndarray, ctx: ChainContext) -> np.ndarray:
    """Moves a free theta_y onto the constraint set (zeros, merges and sign restrictions)."""
    reduced = ctx.reduce(theta_y)
    for k, sgn in ctx.sign_constraints.items():
        if reduced[k] * sgn <= 0:
            reduced[k] = sgn * SIGN_CONSTRAINT_START
    return ctx.linear_map @ reduced


def initial_state(ctx: ChainContext) -> ChainState:
    """Starting values from least squares fits on the observed rows."""
    t, s, y, x = ctx.t, ctx.s, ctx.y, ctx.x
    x_names = [f"x{j + 1}" for j in range(ctx.p)]

    s_design = np.column_stack([1 - t, t, x])
    theta_s, s_resid = least_squares(s_design, s, ["arm0", "arm1"] + x_names)
    sigma2_s = np.array([np.var(s_resid[t == arm], ddof=1) for arm in (0, 1)])
    sigma2_s = np.where(sigma2_s > 0, sigma2_s, 1.0)

    slopes, intercepts, gammas, y_vars = [], [], [], []
    for arm in (0, 1):
        mask = t == arm
        if mask.sum() <= ctx.p + 2:
            raise DataError(f"arm {arm} has too few rows to start a chain with {ctx.p} covariates")
        design = np.column_stack([np.ones(mask.sum()), s[mask], x[mask]])
        coef, resid = least_squares(design, y[mask], ["intercept", "s"] + x_names)
        intercepts.append(coef[0])
        slopes.append(coef[1])
        gammas.append(coef[2:])
        y_vars.append(np.var(resid, ddof=1))

    theta_y = np.concatenate(
        [[slopes[0], 0.0, 0.0, slopes[1]], intercepts, np.mean(gammas, axis=0)]
    )
    theta_y = project_theta_y(theta_y, ctx)

    rho = ctx.constraints.rho_fixed
    if rho is None:
        rho = 0.5 * (ctx.rho_bounds.lo + ctx.rho_bounds.hi)

    x_alpha = x @ theta_s[2:] if ctx.p else np.zeros(ctx.n)
    s_missing = theta_s[1 - t] + x_alpha
    sigma_y2 = max(float(np.mean(y_vars)), 1.01 * ctx.sigma_y2_floor, 1e-8)
    return ChainState(theta_y, theta_s, sigma_y2, sigma2_s, float(rho), s_missing)


class GibbsChain:
    """A single chain of the continuous sampler over a fixed dataset."""

    def __init__(
        self,
        data: Dataset,
        prior: PriorSpec,
        constraints: ConstraintSet,
        config: ChainConfig,
        strata: Sequence[PrincipalStratum] = (),
    ):
        prior.validate()
        constraints.validate()
        config.validate()
        self.check_data(data)

        self.data = data
        self.config = config
        self.strata: List[PrincipalStratum] = list(strata)
        self.ctx = ChainContext.build(data, prior, constraints, config)
        self.rng = RngStream(config.seed, config.stream_id)
        self.state = self.make_initial_state()
        self.accepted = {}

    def check_data(self, data: Dataset):
        data.check_fittable(min_per_arm=3)
        if data.is_binary():
            log.warning("the intermediate is binary; the binary sampler fits this model")

    def make_initial_state(self):
        return initial_state(self.ctx)

    def get_steps(self):
        return GIBBS_STEPS

    def column_names(self) -> List[str]:
        return ChainState.parameter_names(self.ctx.p)

    def sweep(self):
        """Runs every update once, in order."""
        self.state.iteration += 1
        for name, step in self.get_steps():
            try:
                flags = step(self.state, self.ctx, self.rng)
            except Exception as e:
                raise ChainError(name, self.state.iteration, e) from e
            for key, ok in (flags or {}).items():
                self.accepted[key] = self.accepted.get(key, 0) + int(ok)

    def iterate(self, progress: bool = False) -> Iterator[ChainState]:
        """Yields the state after each retained iteration."""
        iterations = range(1, self.config.n_iter + 1)
        if progress:
            iterations = tqdm(iterations, desc="gibbs", leave=False)
        for it in iterations:
            self.sweep()
            if it % DEBUG_EVERY == 0:
                log.debug(
                    "iteration %d: sigma_y2=%.4g rho=%.3f beta01=%.3g beta10=%.3g",
                    it, self.state.sigma_y2, self.state.rho, self.state.theta_y[1], self.state.theta_y[2],
                )
            if self.config.is_retained(it):
                yield self.state

    def run(self, progress: bool = False) -> PosteriorDraws:
        p = self.ctx.p
        log.info(
            "starting chain: n=%d p=%d regime=%s n_iter=%d seed=%d stream=%d floor=%.4g",
            self.data.n, p, self.ctx.constraints.regime, self.config.n_iter,
            self.config.seed, self.config.stream_id, self.ctx.sigma_y2_floor,
        )
        rows, pces = [], []
        for state in self.iterate(progress):
            rows.append(state.vector())
            if self.strata:
                params = state.params
                pces.append([pce_true(params, u) for u in self.strata])

        draws = pd.DataFrame(rows, columns=self.column_names())
        for j, u in enumerate(self.strata):
            draws[pce_column(u)] = [row[j] for row in pces]

        acceptance = {key: count / self.config.n_iter for key, count in self.accepted.items()}
        posterior = PosteriorDraws(
            draws=draws,
            acceptance=acceptance,
            strata=self.strata,
            sigma_y2_floor=self.ctx.sigma_y2_floor,
            meta={
                "regime": self.ctx.constraints.regime,
                "constraints": self.ctx.constraints.to_dict(),
                "prior": self.ctx.prior.to_dict(),
                "chain": self.config.to_dict(),
                "sign_beta_tt": list(self.ctx.sign_beta_tt),
                "n": self.data.n,
                "p": p,
            },
        )
        log.info(
            "chain finished: %d draws, acceptance %s, %.1f%% of sigma_y2 draws at the floor",
            posterior.n_draws,
            {k: round(v, 3) for k, v in acceptance.items()},
            100 * posterior.fraction_at_floor(),
        )
        return posterior


def run_chain(
    data: Dataset,
    prior: PriorSpec,
    constraints: ConstraintSet,
    config: ChainConfig,
    strata: Sequence[PrincipalStratum] = (),
    progress: bool = False,
) -> PosteriorDraws:
    """Fits the joint model to data and returns the retained draws."""
    return GibbsChain(data, prior, constraints, config, strata).run(progress)
