"""Gibbs sampler for the binary intermediate model.

Each sweep imputes the missing strata from their two-point conditionals, draws theta_y and
sigma_y^2 from the same conjugate conditionals as the continuous sampler, refreshes the
margins through a Dirichlet draw with p11 held fixed, and finally draws p11 on a grid from
its observed-data posterior.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import expit

from src.errors import DataError, EmptyRegionError
from src.math_functions import least_squares
from src.probkit.numerical_methods import grid_sample
from src.probkit.rng_stream import RngStream
from src.probkit.samplers import sample_dirichlet
from src.psmodel.dataset import Dataset
from src.psmodel.params import PrincipalStratum
from src.gibbs.chain import GibbsChain, project_theta_y
from src.gibbs.settings import PriorSpec, ConstraintSet, ChainConfig, THETA_Y_NAMES
from src.gibbs.state import PosteriorDraws
from src.gibbs.updates import ChainContext, complete_strata, outcome_design, draw_theta_y, draw_sigma_y2
from src.binary.model import BinaryParams, feasible_p11, cell_weights

log = logging.getLogger(__name__)

BINARY_COLUMNS = list(THETA_Y_NAMES) + ["sigma_y2", "p00", "p01", "p10", "p11"]


@dataclass
class BinaryState:
    theta_y: np.ndarray
    sigma_y2: float
    # (p00, p01, p10, p11)
    probs: np.ndarray
    s_missing: np.ndarray
    iteration: int = 0

    @property
    def rho(self) -> float:
        return float(self.probs[3])

    @property
    def params(self) -> BinaryParams:
        p00, p01, p10, p11 = self.probs
        return BinaryParams(
            beta0=tuple(self.theta_y[0:2]),
            beta1=tuple(self.theta_y[2:4]),
            lambda0=self.theta_y[4],
            lambda1=self.theta_y[5],
            sigma_y2=self.sigma_y2,
            p00=p00,
            p01=p01,
            p10=p10,
            p11=p11,
        )

    def vector(self) -> np.ndarray:
        return np.concatenate([self.theta_y, [self.sigma_y2], self.probs])


def imputation_probabilities(state: BinaryState, ctx: ChainContext) -> np.ndarray:
    """P(S(1 - T_i) = 1 | everything else) for every row."""
    t = ctx.t
    s = ctx.s.astype(int)
    beta = state.theta_y[:4].reshape(2, 2)
    resid = ctx.y - state.theta_y[4 + t] - beta[t, t] * s
    b_off = beta[t, 1 - t]
    w0, w1 = cell_weights(state.probs, t, s)
    with np.errstate(divide="ignore"):
        log_h0 = np.log(w0) - resid**2 / (2 * state.sigma_y2)
        log_h1 = np.log(w1) - (resid - b_off) ** 2 / (2 * state.sigma_y2)
    return expit(log_h1 - log_h0)


def impute_strata(state: BinaryState, ctx: ChainContext, rng: RngStream):
    prob = imputation_probabilities(state, ctx)
    state.s_missing = (rng.gen.random(ctx.n) < prob).astype(float)


def update_theta_y_binary(state: BinaryState, ctx: ChainContext, rng: RngStream):
    s0, s1 = complete_strata(state.s_missing, ctx)
    design = outcome_design(s0, s1, ctx.t, ctx.x)
    state.theta_y = draw_theta_y(design, state.sigma_y2, state.theta_y, ctx, rng)


def update_sigma_y2_binary(state: BinaryState, ctx: ChainContext, rng: RngStream):
    s0, s1 = complete_strata(state.s_missing, ctx)
    residuals = ctx.y - outcome_design(s0, s1, ctx.t, ctx.x) @ state.theta_y
    state.sigma_y2 = draw_sigma_y2(residuals, ctx, rng)


def strata_counts(state: BinaryState, ctx: ChainContext) -> np.ndarray:
    """Complete-data counts (n00, n01, n10, n11)."""
    s0, s1 = complete_strata(state.s_missing, ctx)
    cells = 2 * s0.astype(int) + s1.astype(int)
    return np.bincount(cells, minlength=4)


def update_margins(state: BinaryState, ctx: ChainContext, rng: RngStream):
    """Dirichlet draw of (p10, p01, p00) / (1 - p11) under flat margin priors."""
    n00, n01, n10, _ = strata_counts(state, ctx)
    p11 = state.probs[3]
    p10, p01, p00 = (1 - p11) * sample_dirichlet([n10 + 1, n01 + 1, n00 + 1], rng)
    state.probs = np.array([p00, p01, p10, p11])


def p11_log_posterior(state: BinaryState, ctx: ChainContext):
    """Observed-data log likelihood as a function of p11 (vectorized over a grid), margins fixed."""
    t = ctx.t
    s = ctx.s.astype(int)
    beta = state.theta_y[:4].reshape(2, 2)
    resid = ctx.y - state.theta_y[4 + t] - beta[t, t] * s
    b_off = beta[t, 1 - t]
    log_a = -(resid**2) / (2 * state.sigma_y2)
    log_b = -((resid - b_off) ** 2) / (2 * state.sigma_y2)
    p00, p01, p10, p11 = state.probs
    p1_dot, p_dot1 = p10 + p11, p01 + p11

    def log_density(grid):
        grid = np.atleast_1d(grid)
        probs = np.stack(
            [1 - p1_dot - p_dot1 + grid, p_dot1 - grid, p1_dot - grid, grid], axis=-1
        )
        probs = np.clip(probs, 0.0, None)
        w0, w1 = cell_weights(probs, t, s)
        with np.errstate(divide="ignore"):
            terms = np.logaddexp(np.log(w0) + log_a, np.log(w1) + log_b)
        return terms.sum(axis=1)

    return log_density, feasible_p11(p1_dot, p_dot1)


def update_p11(state: BinaryState, ctx: ChainContext, rng: RngStream):
    if ctx.constraints.rho_fixed is not None:
        return
    log_density, interval = p11_log_posterior(state, ctx)
    if interval.width <= 0:
        raise EmptyRegionError(f"the feasible p11 interval {interval.to_list()} is a single point")
    p11 = grid_sample(log_density, interval, ctx.config.p11_grid_points, rng, vectorized=True)
    p00, p01, p10, old = state.probs
    state.probs = np.array([p00 + p11 - old, p01 - p11 + old, p10 - p11 + old, p11])


BINARY_STEPS = (
    ("impute_strata", impute_strata),
    ("update_theta_y", update_theta_y_binary),
    ("update_sigma_y2", update_sigma_y2_binary),
    ("update_margins", update_margins),
    ("update_p11", update_p11),
)


def initial_binary_state(ctx: ChainContext, rng: RngStream) -> BinaryState:
    t, s, y = ctx.t, ctx.s, ctx.y
    intercepts, slopes, y_vars = [], [], []
    for arm in (0, 1):
        mask = t == arm
        design = np.column_stack([np.ones(mask.sum()), s[mask]])
        coef, resid = least_squares(design, y[mask], ["intercept", "s"])
        intercepts.append(coef[0])
        slopes.append(coef[1])
        y_vars.append(np.var(resid, ddof=1))
    theta_y = project_theta_y(np.array([slopes[0], 0.0, 0.0, slopes[1], *intercepts]), ctx)

    p1_dot = float(np.mean(s[t == 0]))
    p_dot1 = float(np.mean(s[t == 1]))
    p11 = ctx.constraints.rho_fixed
    if p11 is None:
        p11 = p1_dot * p_dot1
    interval = feasible_p11(p1_dot, p_dot1)
    if not interval.contains(p11):
        raise DataError(
            f"p11={p11} is infeasible for the observed margins ({p1_dot:.3f}, {p_dot1:.3f})"
        )
    probs = np.array([1 - p1_dot - p_dot1 + p11, p_dot1 - p11, p1_dot - p11, p11])

    other_margin = np.where(t == 0, p_dot1, p1_dot)
    s_missing = (rng.gen.random(ctx.n) < other_margin).astype(float)
    sigma_y2 = max(float(np.mean(y_vars)), 1.01 * ctx.sigma_y2_floor, 1e-8)
    return BinaryState(theta_y, sigma_y2, probs, s_missing)


class BinaryGibbsChain(GibbsChain):
    """A chain of the binary intermediate sampler. p11 is fixed when constraints.rho_fixed is set."""

    def check_data(self, data: Dataset):
        data.check_fittable(min_per_arm=3)
        if not data.is_binary():
            raise DataError("the binary sampler needs s in {0, 1}")
        if data.has_covariates:
            raise DataError("the binary sampler takes no covariates")

    def make_initial_state(self):
        return initial_binary_state(self.ctx, self.rng)

    def get_steps(self):
        return BINARY_STEPS

    def column_names(self) -> List[str]:
        return BINARY_COLUMNS


def gibbs_binary(
    data: Dataset,
    prior: PriorSpec,
    constraints: ConstraintSet,
    config: ChainConfig,
    strata: Sequence[PrincipalStratum] = (),
    progress: bool = False,
) -> PosteriorDraws:
    """Fits the binary intermediate model to data and returns the retained draws."""
    return BinaryGibbsChain(data, prior, constraints, config, strata).run(progress)
