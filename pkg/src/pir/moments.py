import logging
from dataclasses import dataclass
from math import sqrt, nan
from typing import Tuple

import numpy as np

from src.errors import DataError
from src.math_functions import sign_or_positive
from src.psmodel.dataset import Dataset
from src.psmodel.params import MarginalParams

log = logging.getLogger(__name__)


def _pair(values):
    a, b = values
    return float(a), float(b)


@dataclass(frozen=True)
class ObservedMoments:
    """Identifiable per arm moments that the partial identification regions are built from.

    var_y_given_s[t] = Var{Y(t) | S(t)}, var_s[t] = Var{S(t)}, var_y[t] = Var{Y(t)},
    cor_ys[t] = Cor(Y(t), S(t)), sign_beta_tt[t] = sign of the Y on S slope in arm t.
    """

    var_y_given_s: Tuple[float, float]
    var_s: Tuple[float, float]
    var_y: Tuple[float, float]
    cor_ys: Tuple[float, float]
    sign_beta_tt: Tuple[int, int] = (1, 1)
    # t statistics of the slopes behind sign_beta_tt, nan for population moments
    slope_tstat: Tuple[float, float] = (nan, nan)

    def __post_init__(self):
        for name in ("var_y_given_s", "var_s", "var_y", "cor_ys", "slope_tstat"):
            object.__setattr__(self, name, _pair(getattr(self, name)))
        object.__setattr__(self, "sign_beta_tt", tuple(int(s) for s in self.sign_beta_tt))
        for t in (0, 1):
            if not (self.var_s[t] > 0 and self.var_y[t] > 0):
                raise ValueError(f"arm {t}: variances must be positive")
            if not 0 <= self.var_y_given_s[t] <= self.var_y[t] * (1 + 1e-12):
                raise ValueError(f"arm {t}: need 0 <= Var(Y|S) <= Var(Y)")
            if self.sign_beta_tt[t] not in (-1, 1):
                raise ValueError(f"arm {t}: sign must be +1 or -1")

    def partial_r2(self, t: int) -> float:
        """Share of Var{Y(t)} explained by S(t), i.e. Cor^2."""
        return 1.0 - self.var_y_given_s[t] / self.var_y[t]

    def arms_swapped(self) -> bool:
        """True when the control arm has the larger conditional variance."""
        return self.var_y_given_s[1] < self.var_y_given_s[0]

    def with_signs(self, signs):
        return ObservedMoments(
            self.var_y_given_s, self.var_s, self.var_y, self.cor_ys, tuple(signs), self.slope_tstat
        )

    def to_dict(self):
        return {
            "var_y_given_s": list(self.var_y_given_s),
            "var_s": list(self.var_s),
            "var_y": list(self.var_y),
            "cor_ys": list(self.cor_ys),
            "sign_beta_tt": list(self.sign_beta_tt),
            "slope_tstat": [None if np.isnan(v) else v for v in self.slope_tstat],
        }

    @classmethod
    def from_dict(cls, values: dict):
        values = dict(values)
        if "slope_tstat" in values:
            values["slope_tstat"] = tuple(nan if v is None else v for v in values["slope_tstat"])
        return cls(**values)


def moments_from_marginal(marg: MarginalParams) -> ObservedMoments:
    """Population moments implied by the marginal parameters."""
    var_y_given_s, var_s, cor, signs = [], [], [], []
    for t in (0, 1):
        var_y_given_s.append(marg.var_y_given_s(t))
        var_s.append(marg.sigma_s[t] ** 2)
        cor.append(marg.psi[t] / sqrt(marg.zeta[t]))
        signs.append(sign_or_positive(marg.psi[t]))
    return ObservedMoments(var_y_given_s, var_s, marg.zeta, cor, signs)


def moments_from_data(data: Dataset) -> ObservedMoments:
    """Plug in sample moments per arm; the data must already be free of covariates."""
    if data.has_covariates:
        raise DataError("moments need covariate free data, residualize first")
    var_y_given_s, var_s, var_y, cor, signs, tstats = [], [], [], [], [], []
    for t in (0, 1):
        mask = data.arm(t)
        n_t = int(mask.sum())
        if n_t < 3:
            raise DataError(f"arm {t} has {n_t} rows, need at least 3")
        y, s = data.y[mask], data.s[mask]
        vy, vs = y.var(ddof=1), s.var(ddof=1)
        if vy <= 0:
            raise DataError(f"Y is constant in arm {t}")
        if vs <= 0:
            raise DataError(f"S is constant in arm {t}")
        cov = np.cov(y, s, ddof=1)[0, 1]
        r = cov / sqrt(vy * vs)
        slope = cov / vs
        resid_var = vy * (1 - r**2)
        # standard error of the least squares slope
        se = sqrt(max(resid_var * (n_t - 1) / (n_t - 2), 0.0) / (vs * (n_t - 1)))
        var_y_given_s.append(resid_var)
        var_s.append(vs)
        var_y.append(vy)
        cor.append(r)
        signs.append(sign_or_positive(slope))
        tstats.append(slope / se if se > 0 else np.inf * sign_or_positive(slope))
    moments = ObservedMoments(var_y_given_s, var_s, var_y, cor, signs, tstats)
    log.debug("observed moments %s", moments)
    return moments


def marginal_from_data(data: Dataset) -> MarginalParams:
    """Plug in estimate of the marginal parameters, consistent with moments_from_data."""
    if data.has_covariates:
        raise DataError("marginal estimates need covariate free data, residualize first")
    mu, phi, zeta, psi, sigma = [], [], [], [], []
    for t in (0, 1):
        mask = data.arm(t)
        if mask.sum() < 3:
            raise DataError(f"arm {t} has {int(mask.sum())} rows, need at least 3")
        y, s = data.y[mask], data.s[mask]
        sd = s.std(ddof=1)
        if sd <= 0:
            raise DataError(f"S is constant in arm {t}")
        mu.append(y.mean())
        phi.append(s.mean())
        zeta.append(y.var(ddof=1))
        psi.append(np.cov(y, s, ddof=1)[0, 1] / sd)
        sigma.append(sd)
    return MarginalParams(mu, phi, zeta, psi, sigma)
