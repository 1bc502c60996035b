import json
import logging
import os
from itertools import product

import numpy as np
import pandas as pd

from src.errors import ConfigError, EmptyRegionError, AcceptanceGateError
from src.asymvar.posterior_variance import from_joint, posterior_var_approx, describe
from src.binary.model import BinaryParams, binary_moments, simulate_binary
from src.binary.sampler import gibbs_binary
from src.gibbs.chain import run_chain
from src.gibbs.settings import PriorSpec, ChainConfig
from src.gibbs.state import summarize, write_summary
from src.harness.gates import check_gates
from src.harness.report import write_report, markdown_report, rho_density_frame, rate_frame
from src.harness.runner import run_named, RateStudyResult
from src.harness.scenario import ScenarioSpec, ScenarioId, default_spec
from src.pir.moments import ObservedMoments, moments_from_data, moments_from_marginal, marginal_from_data
from src.pir.regions import region_report, brute_force_regions, pce_band
from src.probkit.rng_stream import RngStream
from src.psmodel.algebra import marginalize
from src.psmodel.dataset import Dataset, read_dataset, write_dataset, residualize
from src.psmodel.params import PrincipalStratum
from src.psmodel.simulation import simulate, standard_normal_covariates
from src.cli.config import resolve_truth, resolve_strata, fit_constraints, rho_values

log = logging.getLogger(__name__)

REPORT_EXTENSIONS = {"csv": "csv", "json": "json", "markdown": "md"}
QUARTILES = (0.25, 0.5, 0.75)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(values: dict, path: str):
    with open(path, "w") as f:
        json.dump(values, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    log.info("wrote %s", path)


def _make_dir(path: str):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {path}: {e}") from e


def default_strata(data: Dataset):
    """Combinations of the quartiles of the observed S in each arm; the four cells for binary S."""
    if data.is_binary():
        return [PrincipalStratum(s0, s1) for s0, s1 in product((0.0, 1.0), repeat=2)]
    q0 = np.quantile(data.s[data.arm(0)], QUARTILES)
    q1 = np.quantile(data.s[data.arm(1)], QUARTILES)
    return [PrincipalStratum(float(a), float(b)) for a, b in product(q0, q1)]


def cmd_simulate(config: dict) -> dict:
    truth = resolve_truth(config["truth"], config["binary"])
    rng = RngStream(config["seed"], 0)
    if isinstance(truth, BinaryParams):
        data = simulate_binary(truth, config["n"], rng)
    else:
        p = truth.n_covariates
        data = simulate(truth, config["n"], standard_normal_covariates(p) if p else None, rng)
    try:
        write_dataset(data, config["out"])
    except OSError as e:
        raise ConfigError(f"out: cannot write {config['out']}: {e}") from e

    moments = moments_from_data(residualize(data))
    summary = {"config": config, "arm_sizes": list(data.arm_sizes()), "moments": moments.to_dict()}
    write_json(summary, os.path.splitext(config["out"])[0] + ".json")
    n0, n1 = data.arm_sizes()
    print(f"wrote {data.n} rows to {config['out']} (control {n0}, treated {n1})")
    for t in (0, 1):
        print(
            f"  arm {t}: Var(Y)={moments.var_y[t]:.4g}  Var(S)={moments.var_s[t]:.4g}  "
            f"Var(Y|S)={moments.var_y_given_s[t]:.4g}  Cor(Y,S)={moments.cor_ys[t]:.3f}"
        )
    return summary


def cmd_fit(config: dict, progress: bool = False) -> dict:
    data = read_dataset(config["data"])
    binary = data.is_binary()
    prior = PriorSpec.from_dict(config["prior"])
    chain = ChainConfig.from_dict(config["chain"], ChainConfig.binary_defaults() if binary else None)
    constraints = fit_constraints(config)
    strata = resolve_strata(config["strata"])
    if strata is None:
        strata = default_strata(data)

    fit = gibbs_binary if binary else run_chain
    log.info("fitting the %s model under regime %s", "binary" if binary else "continuous", constraints.regime)
    posterior = fit(data, prior, constraints, chain, strata, progress=progress)

    _make_dir(config["out"])
    posterior.to_csv(os.path.join(config["out"], "draws.csv"))
    summary = summarize(posterior)
    summary["effective_config"] = config
    summary["binary"] = binary
    write_summary(summary, os.path.join(config["out"], "summary.json"))

    table = pd.DataFrame.from_dict(summary["parameters"], orient="index")
    print(table.to_string(float_format=lambda v: f"{v:.4f}"))
    print(f"sigma_y2 floor {posterior.sigma_y2_floor:.4g}, {100 * posterior.fraction_at_floor():.1f}% of draws at it")
    return summary


def _pir_inputs(config: dict):
    """(moments, marginal parameters or None) from a truth, a dataset or a moments object."""
    if config["truth"] is not None:
        truth = resolve_truth(config["truth"], config["binary"])
        marg = binary_moments(truth) if isinstance(truth, BinaryParams) else marginalize(truth)
        return moments_from_marginal(marg), marg
    if config["data"] is not None:
        data = residualize(read_dataset(config["data"]))
        return moments_from_data(data), marginal_from_data(data)
    try:
        return ObservedMoments.from_dict(config["moments"]), None
    except (TypeError, ValueError) as e:
        raise ConfigError(f"moments: {e}") from e


def cmd_pir(config: dict) -> dict:
    moments, marg = _pir_inputs(config)
    strata = resolve_strata(config["strata"])
    if strata and marg is None:
        raise ConfigError("strata: PCE bands need a truth or a dataset, not bare moments")
    if moments.arms_swapped():
        print("Var(Y|S,T=0) > Var(Y|S,T=1): arm roles exchanged")

    regions, refuted = [], []
    for rho in rho_values(config):
        for assumption in config["assumptions"]:
            try:
                report = region_report(moments, rho, assumption)
            except EmptyRegionError as e:
                refuted.append(e)
                regions.append({"assumption": assumption, "rho": rho, "error": str(e)})
                continue
            if strata:
                report["pce_bands"] = {
                    f"({u.s0:g},{u.s1:g})": pce_band(moments, marg, rho, u, assumption).to_list() for u in strata
                }
            if config["oracle"]:
                grid = {} if config["oracle_grid"] is None else {"n_grid": config["oracle_grid"]}
                oracle01, oracle10 = brute_force_regions(moments, rho, assumption, **grid)
                report["oracle"] = {"beta01": oracle01.to_dict(), "beta10": oracle10.to_dict()}
            regions.append(report)
            print(
                f"rho={rho:g} {assumption:>9}: beta01 in {report['beta01']['intervals']}, "
                f"beta10 in {report['beta10']['intervals']}"
            )

    output = {"config": config, "moments": moments.to_dict(), "arms_swapped": moments.arms_swapped(), "regions": regions}
    write_json(output, config["out"])
    if refuted:
        raise refuted[0]
    return output


def cmd_asym(config: dict) -> dict:
    truth = resolve_truth(config["truth"])
    rows = []
    for n in config["n_values"]:
        value = posterior_var_approx(from_joint(truth, config["t_bar"], n))
        rows.append({"n": n, "posterior_var": describe(value), "posterior_sd": describe(np.sqrt(value))})
        print(f"n={n:>6}: " + (describe(value) if np.isinf(value) else f"var {value:.4g}, sd {np.sqrt(value):.4g}"))
    output = {"config": config, "rows": rows}
    if config["out"] is not None:
        write_json(output, config["out"])
    return output


def scenario_spec(config: dict) -> ScenarioSpec:
    scenario_id = config["scenario"]
    if scenario_id == ScenarioId.Custom:
        return ScenarioSpec.from_dict({**config["spec"], "scenario_id": ScenarioId.Custom})
    spec = default_spec(scenario_id)
    if config["spec"]:
        return ScenarioSpec.from_dict({**spec.to_dict(), **config["spec"], "scenario_id": scenario_id})
    return spec


def cmd_scenario(config: dict, workers: int = 1, progress: bool = False):
    spec = scenario_spec(config)
    result = run_named(spec, workers, progress, config["draws_dir"])
    report = result.report if isinstance(result, RateStudyResult) else result

    out = config["out"]
    _make_dir(out)
    for fmt in config["formats"]:
        write_report(report, os.path.join(out, f"{spec.scenario_id}_report.{REPORT_EXTENSIONS[fmt]}"), fmt)
    if report.rho_draws:
        rho_density_frame(report).to_csv(os.path.join(out, f"{spec.scenario_id}_rho_density.csv"), index=False, float_format="%.17g")
    if isinstance(result, RateStudyResult):
        rate_frame(result.table).to_csv(os.path.join(out, f"{spec.scenario_id}_rate.csv"), index=False, float_format="%.17g")
        print(f"log-log slope of the rho posterior variance: {result.slope:.3f}")
    print(markdown_report(report))

    if config["check"]:
        failures = check_gates(result)
        write_json({"passed": not failures, "failures": failures}, os.path.join(out, f"{spec.scenario_id}_gates.json"))
        if failures:
            raise AcceptanceGateError(failures)
        print("all acceptance gates passed")
    return result
