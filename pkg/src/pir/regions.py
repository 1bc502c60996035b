"""Partial identification regions of the violation coefficients (beta01, beta10).

Every region is the image of a feasible sigma_y^2 interval [L, U] under

    |beta_{t,1-t}| = sqrt((V_t - sigma_y^2) / ((1 - rho^2) Vs_{1-t})),

with V_t = Var{Y(t) | S(t)} and Vs_t = Var{S(t)}. Without assumptions [L, U] = [0, min_t V_t];
the dominant observed effect assumption raises L to max_t V_t^2 / Var{Y(t)}. Both
coefficients are tied together by Vs0 beta10^2 - Vs1 beta01^2 = (V1 - V0) / (1 - rho^2).
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.default_constants import DEFAULT_BAND_GRID, DEFAULT_ORACLE_GRID, ORACLE_BISECTIONS, ORACLE_RTOL
from src.errors import EmptyRegionError, InfeasibleError
from src.probkit.rng_stream import Interval
from src.psmodel.algebra import marginalize, pce_from_marginal, solve_joint
from src.psmodel.params import MarginalParams, PrincipalStratum
from src.pir.moments import ObservedMoments

log = logging.getLogger(__name__)


class Assumption:
    None_ = "none"
    SameSign = "same_sign"
    Dominant = "dominant"

    ALL = (None_, SameSign, Dominant)


@dataclass(frozen=True)
class PirRegion:
    """A union of one or two disjoint ordered intervals plus the coupling constant."""

    intervals: Tuple[Interval, ...]
    constraint_rhs: float

    def __post_init__(self):
        if not 1 <= len(self.intervals) <= 2:
            raise ValueError("a region is one or two intervals")
        if len(self.intervals) == 2 and not self.intervals[0].hi < self.intervals[1].lo:
            raise ValueError("region intervals must be disjoint and ordered")

    @property
    def lo(self):
        return self.intervals[0].lo

    @property
    def hi(self):
        return self.intervals[-1].hi

    def contains(self, x, tol: float = 0.0) -> bool:
        return any(interval.contains(x, tol) for interval in self.intervals)

    def is_subset_of(self, other: "PirRegion", tol: float = 1e-12) -> bool:
        return all(
            any(o.lo - tol <= i.lo and i.hi <= o.hi + tol for o in other.intervals)
            for i in self.intervals
        )

    def to_dict(self):
        return {"intervals": [i.to_list() for i in self.intervals], "constraint_rhs": self.constraint_rhs}


def symmetric_region(inner: float, outer: float, rhs: float) -> PirRegion:
    """{b : inner <= |b| <= outer}."""
    if inner <= 0:
        return PirRegion((Interval(-outer, outer),), rhs)
    return PirRegion((Interval(-outer, -inner), Interval(inner, outer)), rhs)


def signed_region(inner: float, outer: float, sign: int, rhs: float) -> PirRegion:
    """{b : inner <= |b| <= outer, b has the given sign}."""
    if sign > 0:
        return PirRegion((Interval(max(inner, 0.0), outer),), rhs)
    return PirRegion((Interval(-outer, -max(inner, 0.0)),), rhs)


def constraint_rhs(m: ObservedMoments, rho: float) -> float:
    return (m.var_y_given_s[1] - m.var_y_given_s[0]) / (1 - rho**2)


def _check_rho(rho):
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")


def sigma_y2_bounds(m: ObservedMoments, assumption: str = Assumption.None_) -> Interval:
    """The sigma_y^2 values compatible with the moments (and the assumption)."""
    upper = min(m.var_y_given_s)
    if assumption == Assumption.Dominant:
        floors = [m.var_y_given_s[t] ** 2 / m.var_y[t] for t in (0, 1)]
        lower = max(floors)
        if lower > upper:
            worst = int(np.argmax(floors))
            raise EmptyRegionError(
                "dominant observed effect is refuted by the moments: "
                f"Var(Y|S,T={worst})^2 / Var(Y|T={worst}) = {lower:.6g} exceeds "
                f"min_t Var(Y|S,T=t) = {upper:.6g}"
            )
        return Interval(lower, upper)
    if assumption in (Assumption.None_, Assumption.SameSign):
        return Interval(0.0, upper)
    raise ValueError(f"unknown assumption '{assumption}'")


def violation_magnitudes(m: ObservedMoments, rho: float, sigma_y2, t: int):
    """|beta_{t,1-t}| at sigma_y^2 (scalar or array)."""
    o = 1 - t
    excess = np.maximum(m.var_y_given_s[t] - np.asarray(sigma_y2, dtype=float), 0.0)
    return np.sqrt(excess / ((1 - rho**2) * m.var_s[o]))


def _magnitude_range(m, rho, bounds: Interval, t: int):
    return (
        float(violation_magnitudes(m, rho, bounds.hi, t)),
        float(violation_magnitudes(m, rho, bounds.lo, t)),
    )


def pir_unconstrained(m: ObservedMoments, rho: float) -> Tuple[PirRegion, PirRegion]:
    _check_rho(rho)
    rhs = constraint_rhs(m, rho)
    bounds = sigma_y2_bounds(m, Assumption.None_)
    return (
        symmetric_region(*_magnitude_range(m, rho, bounds, 0), rhs),
        symmetric_region(*_magnitude_range(m, rho, bounds, 1), rhs),
    )


def pir_same_sign(m: ObservedMoments, rho: float) -> Tuple[PirRegion, PirRegion]:
    """beta_{t,1-t} shares the sign of beta_tt."""
    _check_rho(rho)
    rhs = constraint_rhs(m, rho)
    bounds = sigma_y2_bounds(m, Assumption.None_)
    return (
        signed_region(*_magnitude_range(m, rho, bounds, 0), m.sign_beta_tt[0], rhs),
        signed_region(*_magnitude_range(m, rho, bounds, 1), m.sign_beta_tt[1], rhs),
    )


def pir_dominant(m: ObservedMoments, rho: float) -> Tuple[PirRegion, PirRegion]:
    """The unobserved intermediate explains no more of Y(t) than the observed one."""
    _check_rho(rho)
    rhs = constraint_rhs(m, rho)
    bounds = sigma_y2_bounds(m, Assumption.Dominant)
    return (
        symmetric_region(*_magnitude_range(m, rho, bounds, 0), rhs),
        symmetric_region(*_magnitude_range(m, rho, bounds, 1), rhs),
    )


REGION_FUNCTIONS = {
    Assumption.None_: pir_unconstrained,
    Assumption.SameSign: pir_same_sign,
    Assumption.Dominant: pir_dominant,
}


def coupling_residual(beta01, beta10, m: ObservedMoments, rho: float):
    """Zero exactly when (beta01, beta10) lies on the identified manifold."""
    return m.var_s[0] * beta10**2 - m.var_s[1] * beta01**2 - constraint_rhs(m, rho)


def admissible_signs(m: ObservedMoments, assumption: str):
    """(sign beta01, sign beta10) pairs allowed under the assumption."""
    if assumption == Assumption.SameSign:
        return [tuple(m.sign_beta_tt)]
    return [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def region_sweep(m: ObservedMoments, rho: float, assumption: str, n_grid: int = DEFAULT_BAND_GRID):
    """Points (sigma_y^2, beta01, beta10) covering the region, one row per grid point and sign pair."""
    _check_rho(rho)
    bounds = sigma_y2_bounds(m, assumption)
    grid = np.linspace(bounds.lo, bounds.hi, n_grid)
    mag01 = violation_magnitudes(m, rho, grid, 0)
    mag10 = violation_magnitudes(m, rho, grid, 1)
    rows = [
        np.column_stack([grid, s01 * mag01, s10 * mag10])
        for s01, s10 in admissible_signs(m, assumption)
    ]
    return np.vstack(rows)


def pce_band(
    m: ObservedMoments,
    marg: MarginalParams,
    rho: float,
    u: PrincipalStratum,
    assumption: str = Assumption.None_,
    n_grid: int = DEFAULT_BAND_GRID,
) -> Interval:
    """Range of the principal causal effect at u over the identified set."""
    points = region_sweep(m, rho, assumption, n_grid)
    if points.size == 0:
        raise EmptyRegionError("no feasible (beta01, beta10) points")
    values = pce_from_marginal(marg, rho, points[:, 1], points[:, 2], u)
    return Interval(float(np.min(values)), float(np.max(values)))


def _moment_marginal(m: ObservedMoments) -> MarginalParams:
    """Zero mean marginal parameters with the variances and covariances of m."""
    psi = [
        float(np.copysign(np.sqrt(max(m.var_y[t] - m.var_y_given_s[t], 0.0)), m.cor_ys[t])) for t in (0, 1)
    ]
    return MarginalParams((0.0, 0.0), (0.0, 0.0), m.var_y, psi, np.sqrt(m.var_s))


def _admissible_joint(marg: MarginalParams, m: ObservedMoments, rho: float, sigma_y2: float, signs, assumption):
    """The joint parameters at (sigma_y^2, signs) if they reproduce the moments and satisfy
    the assumption, else None."""
    try:
        joint = solve_joint(marg, rho, sigma_y2, signs)
    except InfeasibleError:
        return None
    back = marginalize(joint)
    scale = max(marg.zeta)
    if not (
        np.allclose(back.zeta, marg.zeta, rtol=ORACLE_RTOL, atol=scale * ORACLE_RTOL)
        and np.allclose(back.psi, marg.psi, rtol=ORACLE_RTOL, atol=np.sqrt(scale) * ORACLE_RTOL)
    ):
        return None
    cov = joint.strata_cov()
    for t in (0, 1):
        beta = joint.beta(t)
        off = beta[1 - t]
        if assumption == Assumption.SameSign and off * m.sign_beta_tt[t] < 0:
            return None
        if assumption == Assumption.Dominant:
            var_y = float(beta @ cov @ beta) + joint.sigma_y2
            var_y_given_s = joint.sigma_y2 + (1 - rho**2) * cov[1 - t, 1 - t] * off**2
            unobserved_r2 = 1 - joint.sigma_y2 / var_y_given_s
            observed_r2 = 1 - var_y_given_s / var_y
            if unobserved_r2 > observed_r2 + ORACLE_RTOL:
                return None
    return joint


def _region_from_values(values: np.ndarray, rhs: float) -> PirRegion:
    magnitudes = np.abs(values)
    inner, outer = float(magnitudes.min()), float(magnitudes.max())
    if np.any(values > 0) and np.any(values < 0):
        return symmetric_region(inner, outer, rhs)
    return signed_region(inner, outer, -1 if np.any(values < 0) else 1, rhs)


def brute_force_regions(
    m: ObservedMoments,
    rho: float,
    assumption: str = Assumption.None_,
    n_grid: int = DEFAULT_ORACLE_GRID,
) -> Tuple[PirRegion, PirRegion]:
    """Regions found without the closed form.

    sigma_y^2 is scanned over [0, max_t Var(Y(t))] for every sign pair of (beta01, beta10).
    Each point is turned into joint parameters by solve_joint and kept when marginalizing
    them gives back the moments and the assumption holds on the joint itself. The edges of
    the kept set are then located by bisection between neighbouring grid points.
    """
    _check_rho(rho)
    if assumption not in Assumption.ALL:
        raise ValueError(f"unknown assumption '{assumption}', expected one of {Assumption.ALL}")
    marg = _moment_marginal(m)
    grid = np.linspace(0.0, max(m.var_y), n_grid)
    kept = []
    for signs in ((1, 1), (1, -1), (-1, 1), (-1, -1)):

        def admissible(sigma_y2, signs=signs):
            return _admissible_joint(marg, m, rho, sigma_y2, signs, assumption)

        joints = [admissible(s2) for s2 in grid]
        kept.extend(j for j in joints if j is not None)
        for i in range(n_grid - 1):
            if (joints[i] is None) == (joints[i + 1] is None):
                continue
            inside, outside = (grid[i], grid[i + 1]) if joints[i] is not None else (grid[i + 1], grid[i])
            for _ in range(ORACLE_BISECTIONS):
                mid = 0.5 * (inside + outside)
                if admissible(mid) is None:
                    outside = mid
                else:
                    inside = mid
            kept.append(admissible(inside))
    if not kept:
        raise EmptyRegionError(f"no sigma_y2 in [0, {max(m.var_y):.6g}] is admissible under '{assumption}'")
    log.debug("oracle kept %d joint parameter sets under '%s'", len(kept), assumption)
    rhs = constraint_rhs(m, rho)
    return (
        _region_from_values(np.array([j.beta01 for j in kept]), rhs),
        _region_from_values(np.array([j.beta10 for j in kept]), rhs),
    )


def region_report(m: ObservedMoments, rho: float, assumption: str) -> dict:
    """JSON ready description of the regions under one assumption."""
    if assumption not in REGION_FUNCTIONS:
        raise ValueError(f"unknown assumption '{assumption}', expected one of {Assumption.ALL}")
    region01, region10 = REGION_FUNCTIONS[assumption](m, rho)
    bounds = sigma_y2_bounds(m, assumption)
    if m.arms_swapped():
        log.info("Var(Y|S,T=0) > Var(Y|S,T=1): arm roles exchanged")
    return {
        "assumption": assumption,
        "rho": rho,
        "beta01": region01.to_dict(),
        "beta10": region10.to_dict(),
        "sigma_y2_bounds": bounds.to_list(),
        "constraint_rhs": region01.constraint_rhs,
        "arms_swapped": m.arms_swapped(),
        "sign_beta_tt": list(m.sign_beta_tt),
        "slope_tstat": m.to_dict()["slope_tstat"],
    }
