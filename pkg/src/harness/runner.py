"""Simulation studies: simulate a dataset, fit one chain per regime, record how the posterior did.

Every (sample size, replicate, regime) cell is an independent job. Datasets come from the
stream data_stream(size, replicate) and chains from chain_stream(size, replicate, regime), so
results do not depend on how the jobs are scheduled.
"""

import logging
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from src.default_constants import CREDIBLE_LEVEL, MAX_FAILURE_FRACTION
from src.errors import ConfigError, ScenarioAbortedError
from src.asymvar.posterior_variance import from_joint, posterior_var_approx, rate_fit
from src.binary.model import simulate_binary
from src.binary.sampler import gibbs_binary
from src.gibbs.chain import run_chain
from src.gibbs.state import pce_column
from src.probkit.rng_stream import RngStream
from src.psmodel.algebra import pce_true
from src.psmodel.dataset import Dataset
from src.psmodel.simulation import simulate, standard_normal_covariates
from src.threading.job_manager import Job, JobManager
from src.harness.report import PceRecord, ReplicateRecord, ScenarioReport
from src.harness.scenario import ScenarioSpec, ScenarioId

log = logging.getLogger(__name__)


def simulate_replicate(spec: ScenarioSpec, size_index: int, replicate: int) -> Dataset:
    n = spec.sample_sizes[size_index]
    rng = RngStream(spec.base_seed, spec.data_stream(size_index, replicate))
    if spec.is_binary:
        return simulate_binary(spec.truth, n, rng)
    p = spec.truth.n_covariates
    return simulate(spec.truth, n, standard_normal_covariates(p) if p else None, rng)


def fit_replicate(
    spec: ScenarioSpec,
    size_index: int,
    replicate: int,
    regime_index: int,
    draws_dir: Optional[str] = None,
    keep_rho_draws: bool = False,
):
    """Runs one cell of a scenario; returns (ReplicateRecord, rho draws or None)."""
    data = simulate_replicate(spec, size_index, replicate)
    regime = spec.regimes[regime_index]
    config = spec.chain_config(spec.chain_stream(size_index, replicate, regime_index))
    fit = gibbs_binary if spec.is_binary else run_chain
    posterior = fit(data, spec.prior(), spec.constraints(regime), config, spec.strata)

    if draws_dir is not None:
        folder = os.path.join(draws_dir, spec.scenario_id, regime)
        os.makedirs(folder, exist_ok=True)
        posterior.to_csv(os.path.join(folder, f"rep{spec.data_stream(size_index, replicate)}.csv"))

    pces = []
    for u in spec.strata:
        lo, hi = posterior.credible_interval(pce_column(u), CREDIBLE_LEVEL)
        pces.append(PceRecord(u.s0, u.s1, pce_true(spec.truth, u), float(posterior.pce(u).mean()), lo, hi))

    rho_name = "p11" if spec.is_binary else "rho"
    rho = posterior.column(rho_name)
    record = ReplicateRecord(
        n=data.n,
        replicate=replicate,
        regime=regime,
        n_draws=posterior.n_draws,
        rho_mean=float(rho.mean()),
        rho_var=float(rho.var(ddof=1)) if len(rho) > 1 else 0.0,
        beta01_mean=float(posterior.column("beta01").mean()),
        beta10_mean=float(posterior.column("beta10").mean()),
        beta10_positive=float(np.mean(posterior.column("beta10") > 0)),
        fraction_at_floor=posterior.fraction_at_floor(),
        pces=tuple(pces),
    )
    return record, (rho if keep_rho_draws else None)


def run_scenario(
    spec: ScenarioSpec,
    workers: int = 1,
    progress: bool = False,
    draws_dir: Optional[str] = None,
    keep_rho_draws: bool = False,
) -> ScenarioReport:
    """Runs every cell of the scenario and collects the records.

    Failed cells are recorded and the scenario goes on; more than MAX_FAILURE_FRACTION of
    failed cells aborts it.
    """
    spec.validate()
    manager = JobManager(workers, progress, description=f"{spec.scenario_id} fits")
    for size_index in range(len(spec.sample_sizes)):
        for replicate in range(spec.n_replicates):
            for regime_index in range(len(spec.regimes)):
                manager.submit(
                    Job(
                        key=(size_index, replicate, regime_index),
                        fn=fit_replicate,
                        kwargs=dict(
                            spec=spec,
                            size_index=size_index,
                            replicate=replicate,
                            regime_index=regime_index,
                            draws_dir=draws_dir,
                            keep_rho_draws=keep_rho_draws,
                        ),
                        context=dict(
                            seed=spec.base_seed,
                            data_stream=spec.data_stream(size_index, replicate),
                            chain_stream=spec.chain_stream(size_index, replicate, regime_index),
                        ),
                    )
                )

    log.info(
        "scenario %s: sizes=%s replicates=%d regimes=%s seed=%d",
        spec.scenario_id, list(spec.sample_sizes), spec.n_replicates, list(spec.regimes), spec.base_seed,
    )
    results = manager.run_all()

    records, rho_draws = [], {}
    for result in results:
        size_index, replicate, regime_index = result.key
        if result.failed:
            records.append(
                ReplicateRecord.failure(
                    spec.sample_sizes[size_index], replicate, spec.regimes[regime_index], result.error
                )
            )
            continue
        record, rho = result.value
        records.append(record)
        if rho is not None:
            rho_draws.setdefault((record.n, record.regime), []).append(rho)

    n_failed = sum(record.failed for record in records)
    if n_failed > MAX_FAILURE_FRACTION * len(records):
        raise ScenarioAbortedError(
            f"scenario {spec.scenario_id}: {n_failed} of {len(records)} fits failed, "
            f"first error: {next(r.error for r in records if r.failed)}"
        )
    if n_failed:
        log.warning("scenario %s: %d of %d fits failed", spec.scenario_id, n_failed, len(records))

    return ScenarioReport(
        spec,
        records,
        rho_draws={key: np.concatenate(draws) for key, draws in rho_draws.items()},
    )


def rho_ident_study(spec: ScenarioSpec, workers: int = 1, progress: bool = False, draws_dir=None):
    """A scenario that keeps the full rho draws of every cell for density plots."""
    if spec.is_binary:
        raise ConfigError("the rho identification study needs a continuous truth")
    return run_scenario(spec, workers, progress, draws_dir, keep_rho_draws=True)


@dataclass
class RateStudyResult:
    report: ScenarioReport
    # columns n, empirical_variance, approx_variance
    table: pd.DataFrame
    slope: float


def rate_study(spec: ScenarioSpec, workers: int = 1, progress: bool = False, draws_dir=None) -> RateStudyResult:
    """Posterior variance of rho across the sample size ladder and its log-log slope."""
    if spec.is_binary:
        raise ConfigError("the rate study needs a continuous truth")
    if len(spec.sample_sizes) < 3:
        raise ConfigError(f"a rate study needs at least 3 sample sizes, got {list(spec.sample_sizes)}")
    if len(spec.regimes) != 1:
        raise ConfigError(f"a rate study fits a single regime, got {list(spec.regimes)}")

    report = run_scenario(spec, workers, progress, draws_dir)
    empirical = report.regime_frame().set_index("n")["rho_var"]
    rows: List[dict] = []
    for n in spec.sample_sizes:
        # T ~ Bernoulli(0.5) in every simulated dataset
        approx = posterior_var_approx(from_joint(spec.truth, 0.5, n))
        rows.append({"n": n, "empirical_variance": float(empirical[n]), "approx_variance": approx})
    table = pd.DataFrame(rows)
    slope = rate_fit(table["n"], table["empirical_variance"])
    log.info("rate study: log-log slope %.3f over n=%s", slope, list(spec.sample_sizes))
    return RateStudyResult(report, table, slope)


def run_named(spec: ScenarioSpec, workers: int = 1, progress: bool = False, draws_dir=None):
    """Dispatches a spec to its study; returns a ScenarioReport or a RateStudyResult."""
    if spec.scenario_id in (ScenarioId.RhoIdent, ScenarioId.Pi):
        return rho_ident_study(spec, workers, progress, draws_dir)
    if spec.scenario_id == ScenarioId.RateStudy:
        return rate_study(spec, workers, progress, draws_dir)
    return run_scenario(spec, workers, progress, draws_dir)
