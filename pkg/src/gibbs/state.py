import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd

from src.default_constants import CREDIBLE_LEVEL
from src.math_functions import equal_tailed_interval
from src.psmodel.params import JointParams, PrincipalStratum
from src.gibbs.settings import theta_y_names, theta_s_names

log = logging.getLogger(__name__)


@dataclass
class ChainState:
    """Current values of a continuous chain.

    theta_y = (beta00, beta01, beta10, beta11, lambda0, lambda1, gamma),
    theta_s = (phi0, phi1, alpha), s_missing holds the unobserved S(1 - T_i).
    """

    theta_y: np.ndarray
    theta_s: np.ndarray
    sigma_y2: float
    sigma2_s: np.ndarray
    rho: float
    s_missing: np.ndarray
    iteration: int = 0

    @property
    def p(self) -> int:
        return len(self.theta_s) - 2

    @property
    def params(self) -> JointParams:
        p = self.p
        return JointParams(
            beta0=tuple(self.theta_y[0:2]),
            beta1=tuple(self.theta_y[2:4]),
            lambda0=self.theta_y[4],
            lambda1=self.theta_y[5],
            sigma_y2=self.sigma_y2,
            phi0=self.theta_s[0],
            phi1=self.theta_s[1],
            sigma_s0=float(np.sqrt(self.sigma2_s[0])),
            sigma_s1=float(np.sqrt(self.sigma2_s[1])),
            rho=self.rho,
            gamma=tuple(self.theta_y[6:]) if p else (),
            alpha=tuple(self.theta_s[2:]) if p else (),
        )

    def copy(self):
        return ChainState(
            self.theta_y.copy(),
            self.theta_s.copy(),
            self.sigma_y2,
            self.sigma2_s.copy(),
            self.rho,
            self.s_missing.copy(),
            self.iteration,
        )

    def vector(self) -> np.ndarray:
        """Parameter values in the column order of parameter_names."""
        return np.concatenate([self.theta_y, self.theta_s, [self.sigma_y2], self.sigma2_s, [self.rho]])

    @staticmethod
    def parameter_names(p: int) -> List[str]:
        return theta_y_names(p) + theta_s_names(p) + ["sigma_y2", "sigma2_s0", "sigma2_s1", "rho"]


def pce_column(u: PrincipalStratum) -> str:
    return f"pce({u.s0:g},{u.s1:g})"


@dataclass
class PosteriorDraws:
    """Retained draws of one chain, one row per draw, plus run metadata."""

    draws: pd.DataFrame
    acceptance: Dict[str, float] = field(default_factory=dict)
    strata: List[PrincipalStratum] = field(default_factory=list)
    sigma_y2_floor: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    def column(self, name: str) -> np.ndarray:
        return self.draws[name].to_numpy()

    def pce(self, u: PrincipalStratum) -> np.ndarray:
        return self.column(pce_column(u))

    def credible_interval(self, name: str, level: float = CREDIBLE_LEVEL):
        return equal_tailed_interval(self.column(name), level)

    def fraction_at_floor(self, rel: float = 0.01) -> float:
        """Share of sigma_y^2 draws within rel of the truncation floor."""
        if self.sigma_y2_floor <= 0 or "sigma_y2" not in self.draws:
            return 0.0
        return float(np.mean(self.column("sigma_y2") <= self.sigma_y2_floor * (1 + rel)))

    def to_csv(self, path):
        self.draws.to_csv(path, index=False, float_format="%.17g")
        log.info("wrote %d draws to %s", self.n_draws, path)


def summarize(posterior: PosteriorDraws, level: float = CREDIBLE_LEVEL) -> dict:
    """Posterior means, sds and equal tailed quantiles of every column, plus run metadata."""
    tail = (1 - level) / 2
    columns = {}
    for name in posterior.draws.columns:
        values = posterior.column(name)
        lo, hi = np.quantile(values, [tail, 1 - tail])
        columns[name] = {
            "mean": float(values.mean()),
            "sd": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
            f"q{tail * 100:g}": float(lo),
            f"q{(1 - tail) * 100:g}": float(hi),
        }
    return {
        "n_draws": posterior.n_draws,
        "parameters": columns,
        "acceptance": dict(posterior.acceptance),
        "sigma_y2_floor": posterior.sigma_y2_floor,
        "fraction_at_floor": posterior.fraction_at_floor(),
        "config": posterior.meta,
    }


def write_summary(summary: dict, path):
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
