"""Acceptance thresholds checked by `scenario --check`.

check_gates returns the list of failed gates, empty when everything passes; the caller decides
whether that is an error.
"""

import logging
from typing import List

import numpy as np
from scipy import stats

from src.default_constants import (
    TABLE1_REFERENCE_MEANS,
    TABLE1_REFERENCE_WIDTHS,
    GATE_MIN_ECR,
    GATE_MEAN_TOL,
    GATE_WIDTH_REL_TOL,
    GATE_RHO_MEAN_RANGE,
    GATE_RHO_MAX_SD_IDENTIFIED,
    GATE_RHO_MIN_SD_UNCONSTRAINED,
    GATE_SLOPE_RANGE,
    GATE_ASYMVAR_FACTOR,
    GATE_BINARY_BETA_TOL,
    GATE_BINARY_MIN_SIGN_MASS,
    GATE_BINARY_P11_TOL,
)
from src.pir.moments import moments_from_marginal
from src.pir.regions import pir_unconstrained
from src.psmodel.algebra import marginalize
from src.harness.report import ScenarioReport
from src.harness.runner import RateStudyResult
from src.harness.scenario import ScenarioId

log = logging.getLogger(__name__)

# significance level of the test that rho draws follow the prior without a violation
KS_ALPHA = 0.01
# lag autocorrelation below which rho draws count as independent for the KS test
AUTOCORR_CUTOFF = 0.05
# tolerance of the violation region anchor
ANCHOR_TOL = 1e-6


def _regime_row(report: ScenarioReport, regime: str, n=None):
    frame = report.regime_frame()
    n = max(report.spec.sample_sizes) if n is None else n
    rows = frame[(frame.n == n) & (frame.regime == regime)]
    return None if rows.empty else rows.iloc[0]


def table1_gates(report: ScenarioReport) -> List[str]:
    failures = []
    strata = report.stratum_frame()
    for row in strata.itertuples():
        if row.ecr < GATE_MIN_ECR:
            failures.append(f"{row.regime} ({row.s0:g},{row.s1:g}): ECR {row.ecr:.2f} < {GATE_MIN_ECR}")

    for regime, means in TABLE1_REFERENCE_MEANS.items():
        cells = strata[strata.regime == regime]
        if len(cells) != len(means):
            continue
        widths = TABLE1_REFERENCE_WIDTHS[regime]
        for (mean, width), ref_mean, ref_width in zip(cells[["mean", "width"]].to_numpy(), means, widths):
            if abs(mean - ref_mean) > GATE_MEAN_TOL:
                failures.append(f"{regime}: average posterior mean {mean:.2f} is not within {GATE_MEAN_TOL} of {ref_mean}")
            if abs(width - ref_width) > GATE_WIDTH_REL_TOL * ref_width:
                failures.append(f"{regime}: average width {width:.2f} is not within {100 * GATE_WIDTH_REL_TOL:g}% of {ref_width}")

    ordered = ("dominant", "same_sign_arm1", "none")
    if all(regime in report.spec.regimes for regime in ordered) and len(report.spec.strata) >= 2:
        for u in (report.spec.strata[0], report.spec.strata[-1]):
            cells = strata[(strata.s0 == u.s0) & (strata.s1 == u.s1)].set_index("regime")["width"]
            widths = [cells[regime] for regime in ordered]
            if not widths[0] < widths[1] < widths[2]:
                failures.append(f"({u.s0:g},{u.s1:g}): widths {widths} are not ordered dominant < same sign < none")

    truth = report.spec.truth
    if truth.beta01 == 0 and report.spec.rho_fixed is not None:
        moments = moments_from_marginal(marginalize(truth))
        _, region10 = pir_unconstrained(moments, report.spec.rho_fixed)
        inner = region10.intervals[-1].lo
        if abs(inner - abs(truth.beta10)) > ANCHOR_TOL:
            failures.append(f"beta10 region inner end {inner:.8g} differs from |beta10| = {abs(truth.beta10):g}")
    return failures


def _decorrelated(draws: np.ndarray) -> np.ndarray:
    """Every k-th draw, k the first lag whose sample autocorrelation is below AUTOCORR_CUTOFF."""
    centered = np.asarray(draws, dtype=float) - np.mean(draws)
    total = centered @ centered
    if total == 0:
        return np.asarray(draws)
    for lag in range(1, len(centered) // 2):
        if centered[:-lag] @ centered[lag:] / total < AUTOCORR_CUTOFF:
            return np.asarray(draws)[::lag]
    return np.asarray(draws)[:: max(len(centered) // 2, 1)]


def _prior_ks_failures(report: ScenarioReport) -> List[str]:
    """rho does not enter the likelihood under the pi regime, so its draws must follow the prior."""
    failures = []
    lo, hi = report.spec.rho_interval
    for (n, regime), draws in report.rho_draws.items():
        if regime != "pi":
            continue
        kept = _decorrelated(draws)
        p_value = stats.kstest(kept, stats.uniform(lo, hi - lo).cdf).pvalue
        log.debug("pi, n=%d: KS test on %d of %d rho draws", n, len(kept), len(draws))
        if p_value < KS_ALPHA:
            failures.append(f"pi, n={n}: rho draws differ from the prior (KS p-value {p_value:.4f})")
    return failures


def _unidentified_rho_failures(report: ScenarioReport) -> List[str]:
    free = _regime_row(report, "none")
    if free is not None and not free.rho_sd > GATE_RHO_MIN_SD_UNCONSTRAINED:
        return [f"no constraints: rho posterior sd {free.rho_sd:.3f} <= {GATE_RHO_MIN_SD_UNCONSTRAINED}"]
    return []


def rho_ident_gates(report: ScenarioReport) -> List[str]:
    failures = []
    identified = _regime_row(report, "two_constraints")
    if identified is not None:
        lo, hi = GATE_RHO_MEAN_RANGE
        if not lo <= identified.rho_mean <= hi:
            failures.append(f"two constraints: rho posterior mean {identified.rho_mean:.3f} outside [{lo}, {hi}]")
        if not identified.rho_sd < GATE_RHO_MAX_SD_IDENTIFIED:
            failures.append(f"two constraints: rho posterior sd {identified.rho_sd:.3f} >= {GATE_RHO_MAX_SD_IDENTIFIED}")
    free = _regime_row(report, "none")
    if identified is not None and free is not None and not free.rho_sd > identified.rho_sd:
        failures.append(
            f"rho posterior sd without constraints ({free.rho_sd:.3f}) is not above "
            f"the one under two constraints ({identified.rho_sd:.3f})"
        )
    return failures + _unidentified_rho_failures(report) + _prior_ks_failures(report)


def pi_gates(report: ScenarioReport) -> List[str]:
    return _unidentified_rho_failures(report) + _prior_ks_failures(report)


def rate_study_gates(result: RateStudyResult) -> List[str]:
    failures = []
    lo, hi = GATE_SLOPE_RANGE
    if not lo <= result.slope <= hi:
        failures.append(f"log-log slope {result.slope:.3f} outside [{lo}, {hi}]")
    last = result.table.iloc[-1]
    ratio = last.empirical_variance / last.approx_variance
    if not 1 / GATE_ASYMVAR_FACTOR <= ratio <= GATE_ASYMVAR_FACTOR:
        failures.append(
            f"n={int(last.n)}: empirical variance {last.empirical_variance:.3g} is not within a factor "
            f"{GATE_ASYMVAR_FACTOR:g} of the approximation {last.approx_variance:.3g}"
        )
    return failures


def binary_sign_gates(report: ScenarioReport) -> List[str]:
    failures = []
    truth = report.spec.truth
    signed = _regime_row(report, "sign_positive")
    if signed is not None:
        for name, value in (("beta01", truth.beta01), ("beta10", truth.beta10)):
            mean = signed[f"{name}_mean"]
            if abs(mean - value) > GATE_BINARY_BETA_TOL:
                failures.append(f"sign constrained: {name} posterior mean {mean:.3f} is not within {GATE_BINARY_BETA_TOL} of {value}")
    free = _regime_row(report, "none")
    if free is not None:
        positive = free.beta10_positive
        if not GATE_BINARY_MIN_SIGN_MASS <= positive <= 1 - GATE_BINARY_MIN_SIGN_MASS:
            failures.append(f"unconstrained: beta10 draws are {100 * positive:.1f}% positive, expected both signs")
    return failures


def binary_p11_gates(report: ScenarioReport) -> List[str]:
    signed = _regime_row(report, "sign_positive")
    if signed is None:
        return []
    truth = report.spec.truth.p11
    if abs(signed.rho_mean - truth) > GATE_BINARY_P11_TOL:
        return [f"sign constrained: p11 posterior mean {signed.rho_mean:.3f} is not within {GATE_BINARY_P11_TOL} of {truth}"]
    return []


def check_gates(result) -> List[str]:
    """Failed acceptance gates of a finished scenario; a ScenarioReport or a RateStudyResult."""
    if isinstance(result, RateStudyResult):
        failures = rate_study_gates(result)
        spec = result.report.spec
    else:
        spec = result.spec
        gates = {
            ScenarioId.Table1: table1_gates,
            ScenarioId.RhoIdent: rho_ident_gates,
            ScenarioId.Pi: pi_gates,
            ScenarioId.BinarySign: binary_sign_gates,
            ScenarioId.BinaryP11: binary_p11_gates,
        }
        if spec.scenario_id not in gates:
            log.info("scenario %s has no acceptance gates", spec.scenario_id)
            return []
        failures = gates[spec.scenario_id](result)
    for failure in failures:
        log.warning("gate failed: %s", failure)
    if not failures:
        log.info("all acceptance gates of %s passed", spec.scenario_id)
    return failures
