import json
import os

import numpy as np
import pytest

from src.default_constants import CHAIN_STREAM_OFFSET, GATE_SLOPE_RANGE
from src.errors import ConfigError, NumericalError, ScenarioAbortedError
from src.asymvar.posterior_variance import from_joint, posterior_var_approx
from src.harness import runner as runner_module
from src.harness.report import (
    ReplicateRecord,
    ScenarioReport,
    emit_report,
    parse_report_csv,
    rho_density_frame,
    rate_frame,
)
from src.harness.gates import check_gates
from src.harness.runner import run_named, run_scenario, rho_ident_study, rate_study, simulate_replicate
from src.harness.scenario import ScenarioId, default_spec
from src.psmodel.algebra import pce_true
from src.psmodel.presets import SETTING_5_STRATA
from src.threading.job_manager import resolve_workers

SHORT_CHAIN = {"n_iter": 60, "burn_in": 20, "thin": 4}


@pytest.fixture(scope="module")
def small_spec():
    return default_spec(ScenarioId.Table1).replace(
        sample_sizes=(150,),
        n_replicates=2,
        regimes=("none", "dominant"),
        strata=SETTING_5_STRATA[:2],
        chain=SHORT_CHAIN,
        base_seed=7,
    )


@pytest.fixture(scope="module")
def small_report(small_spec):
    return run_scenario(small_spec)


class TestRunScenario:
    def test_records(self, small_spec, small_report):
        assert len(small_report.records) == 4
        assert [(r.replicate, r.regime) for r in small_report.records] == [
            (0, "none"), (0, "dominant"), (1, "none"), (1, "dominant"),
        ]
        for record in small_report.records:
            assert not record.failed
            assert record.n == 150 and record.n_draws == 10
            assert record.rho_mean == 0.75 and record.rho_var == 0.0
            assert [p.truth for p in record.pces] == [pce_true(small_spec.truth, u) for u in SETTING_5_STRATA[:2]]

    def test_summaries(self, small_report):
        strata = small_report.stratum_frame()
        assert len(strata) == 4
        assert strata.ecr.between(0, 1).all()
        assert (strata.width >= 0).all()
        assert (strata.replicates == 2).all()
        regimes = small_report.regime_frame()
        assert list(regimes.regime) == ["none", "dominant"]
        assert (regimes.failed == 0).all()

    def test_single_cell_is_its_own_summary(self, small_spec):
        report = run_scenario(small_spec.replace(n_replicates=1, regimes=("none",)))
        (record,) = report.records
        row = report.stratum_frame().iloc[0]
        pce = record.pces[0]
        assert row["mean"] == pce.mean
        assert row["width"] == pce.width
        assert row["ecr"] == float(pce.covered)

    def test_deterministic(self, small_spec, small_report):
        assert run_scenario(small_spec) == small_report

    def test_independent_of_scheduling(self, small_spec, small_report):
        assert run_scenario(small_spec, workers=2) == small_report

    def test_replicates_see_different_data(self, small_spec):
        a = simulate_replicate(small_spec, 0, 0)
        b = simulate_replicate(small_spec, 0, 1)
        assert not np.array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.y, simulate_replicate(small_spec, 0, 0).y)

    def test_draws_are_persisted(self, small_spec, tmp_path):
        run_scenario(small_spec.replace(n_replicates=1), draws_dir=str(tmp_path))
        for regime in ("none", "dominant"):
            assert os.path.exists(tmp_path / "table1" / regime / "rep0.csv")


class TestFailures:
    def failing_fit(self, monkeypatch, fail, error=NumericalError("no luck")):
        real = runner_module.run_chain

        def fit(data, prior, constraints, config, strata):
            if fail(config.stream_id - CHAIN_STREAM_OFFSET):
                raise error
            return real(data, prior, constraints, config, strata)

        monkeypatch.setattr(runner_module, "run_chain", fit)

    def test_failure_is_recorded(self, small_spec, monkeypatch):
        self.failing_fit(monkeypatch, lambda stream: stream == 0)
        report = run_scenario(small_spec.replace(n_replicates=5, regimes=("none",)))
        assert sum(r.failed for r in report.records) == 1
        assert "no luck" in report.records[0].error
        assert report.regime_frame().failed.iloc[0] == 1
        assert report.stratum_frame().replicates.iloc[0] == 4

    def test_unexpected_error_names_seed_and_streams(self, small_spec, monkeypatch):
        self.failing_fit(monkeypatch, lambda stream: stream == 0, TypeError("bad operand"))
        report = run_scenario(small_spec.replace(n_replicates=5, regimes=("none",)))
        error = report.records[0].error
        assert error.startswith("TypeError: bad operand")
        assert f"seed=7, data_stream=0, chain_stream={CHAIN_STREAM_OFFSET}" in error
        assert sum(r.failed for r in report.records) == 1

    def test_too_many_failures_abort(self, small_spec, monkeypatch):
        self.failing_fit(monkeypatch, lambda stream: stream < 2)
        with pytest.raises(ScenarioAbortedError, match="2 of 5"):
            run_scenario(small_spec.replace(n_replicates=5, regimes=("none",)))


class TestReport:
    def test_csv_round_trip(self, small_report):
        assert parse_report_csv(emit_report(small_report, "csv")) == small_report

    def test_csv_round_trip_with_failure(self, small_report):
        records = list(small_report.records)
        records[1] = ReplicateRecord.failure(150, 0, "dominant", "ChainError: boom")
        report = ScenarioReport(small_report.spec, records)
        assert parse_report_csv(emit_report(report, "csv")) == report

    def test_json_echoes_config(self, small_spec, small_report):
        values = json.loads(emit_report(small_report, "json"))
        assert values["base_seed"] == 7
        assert values["spec"] == json.loads(json.dumps(small_spec.to_dict()))
        assert len(values["records"]) == 4

    def test_markdown_layout(self, small_report):
        text = emit_report(small_report, "markdown")
        assert "| Stratum | Truth | none Mean | none ECR | none Width | dominant Mean |" in text
        assert text.count("| (0.89, ") == 2

    def test_unknown_format(self, small_report):
        with pytest.raises(ConfigError, match="markdown"):
            emit_report(small_report, "xlsx")


class TestStudies:
    def test_rho_density(self):
        spec = default_spec(ScenarioId.RhoIdent).replace(
            sample_sizes=(200,), regimes=("none", "two_constraints"), chain=SHORT_CHAIN
        )
        report = rho_ident_study(spec)
        assert set(report.rho_draws) == {(200, "none"), (200, "two_constraints")}
        density = rho_density_frame(report, bins=20)
        assert len(density) == 40
        for _, cell in density.groupby("regime"):
            width = spec.rho_interval[1] / 20
            assert cell.density.sum() * width == pytest.approx(1.0)

    def test_rate_study_table(self):
        spec = default_spec(ScenarioId.RateStudy).replace(
            sample_sizes=(150, 300, 600), n_replicates=1, chain={"n_iter": 100, "burn_in": 20, "thin": 4}
        )
        result = rate_study(spec)
        assert list(result.table.n) == [150, 300, 600]
        for row in result.table.itertuples():
            assert row.approx_variance == posterior_var_approx(from_joint(spec.truth, 0.5, row.n))
            assert row.empirical_variance > 0
        assert np.isfinite(result.slope)
        assert "log_empirical_variance" in rate_frame(result.table)

    def test_rate_study_needs_a_ladder(self):
        spec = default_spec(ScenarioId.RateStudy).replace(sample_sizes=(300,))
        with pytest.raises(ConfigError, match="at least 3"):
            rate_study(spec)


@pytest.mark.slow
class TestPresetStudies:
    def test_pi_rho_draws_follow_the_prior(self):
        report = run_named(default_spec(ScenarioId.Pi))
        assert check_gates(report) == []

    def test_rho_sd_shrinks_under_two_constraints(self):
        spec = default_spec(ScenarioId.RhoIdent).replace(sample_sizes=(1200,), regimes=("none", "two_constraints"))
        frame = run_named(spec).regime_frame().set_index("regime")
        assert frame.rho_sd["none"] > frame.rho_sd["two_constraints"]

    def test_table1_passes_its_gates(self):
        report = run_named(default_spec(ScenarioId.Table1).replace(n_replicates=20), workers=resolve_workers())
        assert check_gates(report) == []

    def test_rate_slope(self):
        result = run_named(default_spec(ScenarioId.RateStudy), workers=resolve_workers())
        lo, hi = GATE_SLOPE_RANGE
        assert lo <= result.slope <= hi
