import io
import json
import logging
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.default_constants import RHO_DENSITY_BINS
from src.errors import ConfigError
from src.harness.scenario import ScenarioSpec

log = logging.getLogger(__name__)


class ReportFormat:
    Csv = "csv"
    Json = "json"
    Markdown = "markdown"

    ALL = (Csv, Json, Markdown)


@dataclass(frozen=True)
class PceRecord:
    """Posterior of one principal causal effect in one fit."""

    s0: float
    s1: float
    truth: float
    mean: float
    lo: float
    hi: float

    @property
    def covered(self) -> bool:
        return self.lo <= self.truth <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ReplicateRecord:
    """Summaries of one fit: one dataset under one regime."""

    n: int
    replicate: int
    regime: str
    n_draws: int = 0
    # rho, or p11 for binary truths
    rho_mean: Optional[float] = None
    rho_var: Optional[float] = None
    beta01_mean: Optional[float] = None
    beta10_mean: Optional[float] = None
    # share of beta10 draws above zero
    beta10_positive: Optional[float] = None
    fraction_at_floor: Optional[float] = None
    pces: Tuple[PceRecord, ...] = ()
    error: Optional[str] = None

    @classmethod
    def failure(cls, n: int, replicate: int, regime: str, error: str):
        return cls(n, replicate, regime, error=error)

    @property
    def failed(self) -> bool:
        return self.error is not None


# per record columns of the long csv, one row per (record, stratum)
RECORD_COLUMNS = [
    "n", "replicate", "regime", "n_draws", "rho_mean", "rho_var", "beta01_mean", "beta10_mean",
    "beta10_positive", "fraction_at_floor", "error",
]
PCE_COLUMNS = ["s0", "s1", "truth", "mean", "lo", "hi"]


@dataclass
class ScenarioReport:
    spec: ScenarioSpec
    records: List[ReplicateRecord]
    # (n, regime) -> rho draws pooled over replicates, kept only on request
    rho_draws: Dict[Tuple[int, str], np.ndarray] = field(default_factory=dict, compare=False)

    def successful(self) -> List[ReplicateRecord]:
        return [record for record in self.records if not record.failed]

    def stratum_frame(self) -> pd.DataFrame:
        """Average posterior mean, coverage and interval width per (n, regime, stratum)."""
        rows = []
        for record in self.successful():
            for pce in record.pces:
                rows.append(
                    {
                        "n": record.n,
                        "regime": record.regime,
                        "s0": pce.s0,
                        "s1": pce.s1,
                        "truth": pce.truth,
                        "mean": pce.mean,
                        "covered": float(pce.covered),
                        "width": pce.width,
                    }
                )
        columns = ["n", "regime", "s0", "s1", "truth", "mean", "ecr", "width", "replicates"]
        if not rows:
            return pd.DataFrame(columns=columns)
        frame = pd.DataFrame(rows)
        summary = (
            frame.groupby(["n", "regime", "s0", "s1"], sort=False)
            .agg(
                truth=("truth", "first"),
                mean=("mean", "mean"),
                ecr=("covered", "mean"),
                width=("width", "mean"),
                replicates=("mean", "size"),
            )
            .reset_index()
        )
        return summary[columns]

    def regime_frame(self) -> pd.DataFrame:
        """Posterior summaries of rho (p11) and the violation pair averaged per (n, regime)."""
        rows = []
        for n in self.spec.sample_sizes:
            for regime in self.spec.regimes:
                cell = [r for r in self.records if r.n == n and r.regime == regime]
                ok = [r for r in cell if not r.failed]

                def average(name):
                    values = [getattr(r, name) for r in ok]
                    return float(np.mean(values)) if values else np.nan

                rows.append(
                    {
                        "n": n,
                        "regime": regime,
                        "rho_mean": average("rho_mean"),
                        "rho_var": average("rho_var"),
                        "rho_sd": float(np.mean([np.sqrt(r.rho_var) for r in ok])) if ok else np.nan,
                        "beta01_mean": average("beta01_mean"),
                        "beta10_mean": average("beta10_mean"),
                        "beta10_positive": average("beta10_positive"),
                        "fraction_at_floor": average("fraction_at_floor"),
                        "replicates": len(ok),
                        "failed": len(cell) - len(ok),
                    }
                )
        return pd.DataFrame(rows)


def records_frame(report: ScenarioReport) -> pd.DataFrame:
    rows = []
    for record in report.records:
        values = {name: getattr(record, name) for name in RECORD_COLUMNS}
        if not record.pces:
            rows.append({**values, **{name: None for name in PCE_COLUMNS}})
        for pce in record.pces:
            rows.append({**values, **{name: getattr(pce, name) for name in PCE_COLUMNS}})
    return pd.DataFrame(rows, columns=RECORD_COLUMNS + PCE_COLUMNS)


def _optional(value, kind=float):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    return kind(value)


def parse_report_csv(text: str) -> ScenarioReport:
    """Reads back the csv form of emit_report."""
    header, _, body = text.partition("\n")
    if not header.startswith("# "):
        raise ConfigError("report csv lacks its scenario header line")
    spec = ScenarioSpec.from_dict(json.loads(header[2:]))
    frame = pd.read_csv(
        io.StringIO(body), float_precision="round_trip", dtype={"regime": str, "error": str}, keep_default_na=False,
        na_values={name: [""] for name in RECORD_COLUMNS + PCE_COLUMNS if name not in ("regime", "error")},
    )

    records = []
    for _, group in frame.groupby(["n", "replicate", "regime"], sort=False):
        first = group.iloc[0]
        pces = tuple(
            PceRecord(*(float(row[name]) for name in PCE_COLUMNS))
            for _, row in group.iterrows()
            if not pd.isna(row["s0"])
        )
        records.append(
            ReplicateRecord(
                n=int(first["n"]),
                replicate=int(first["replicate"]),
                regime=first["regime"],
                n_draws=int(first["n_draws"]),
                rho_mean=_optional(first["rho_mean"]),
                rho_var=_optional(first["rho_var"]),
                beta01_mean=_optional(first["beta01_mean"]),
                beta10_mean=_optional(first["beta10_mean"]),
                beta10_positive=_optional(first["beta10_positive"]),
                fraction_at_floor=_optional(first["fraction_at_floor"]),
                pces=pces,
                error=first["error"] or None,
            )
        )
    return ScenarioReport(spec, records)


def _markdown_table(columns: List[str], rows: List[List[str]]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines)


def markdown_report(report: ScenarioReport) -> str:
    """One row per stratum with Truth, then Mean, ECR and Width for every regime."""
    spec = report.spec
    strata = report.stratum_frame()
    blocks = [f"## {spec.scenario_id} (seed {spec.base_seed}, {spec.n_replicates} replicates)"]
    for n in spec.sample_sizes:
        if len(strata):
            columns = ["Stratum", "Truth"]
            for regime in spec.regimes:
                columns += [f"{regime} Mean", f"{regime} ECR", f"{regime} Width"]
            rows = []
            for u in spec.strata:
                cells = strata[(strata.n == n) & (strata.s0 == u.s0) & (strata.s1 == u.s1)]
                if cells.empty:
                    continue
                row = [f"({u.s0:g}, {u.s1:g})", f"{cells.truth.iloc[0]:.2f}"]
                for regime in spec.regimes:
                    cell = cells[cells.regime == regime]
                    if cell.empty:
                        row += ["-", "-", "-"]
                    else:
                        row += [f"{cell['mean'].iloc[0]:.2f}", f"{cell.ecr.iloc[0]:.2f}", f"{cell.width.iloc[0]:.2f}"]
                rows.append(row)
            blocks.append(f"### n = {n}\n\n" + _markdown_table(columns, rows))

    regimes = report.regime_frame()
    rho_name = "p11" if spec.is_binary else "rho"
    columns = ["n", "Regime", f"{rho_name} mean", f"{rho_name} sd", "beta01 mean", "beta10 mean", "Failed"]
    rows = [
        [str(r.n), r.regime, f"{r.rho_mean:.4f}", f"{r.rho_sd:.4f}", f"{r.beta01_mean:.4f}", f"{r.beta10_mean:.4f}",
         str(r.failed)]
        for r in regimes.itertuples()
    ]
    blocks.append(_markdown_table(columns, rows))
    return "\n\n".join(blocks) + "\n"


def emit_report(report: ScenarioReport, fmt: str) -> str:
    if fmt == ReportFormat.Csv:
        header = "# " + json.dumps(report.spec.to_dict(), sort_keys=True)
        return header + "\n" + records_frame(report).to_csv(index=False, float_format="%.17g")
    if fmt == ReportFormat.Json:
        return json.dumps(
            {
                "spec": report.spec.to_dict(),
                "base_seed": report.spec.base_seed,
                "strata": report.stratum_frame().to_dict(orient="records"),
                "regimes": report.regime_frame().to_dict(orient="records"),
                "records": [asdict(record) for record in report.records],
            },
            indent=2,
            sort_keys=True,
            default=float,
        )
    if fmt == ReportFormat.Markdown:
        return markdown_report(report)
    raise ConfigError(f"unknown report format '{fmt}', expected one of {list(ReportFormat.ALL)}")


def write_report(report: ScenarioReport, path: str, fmt: str):
    with open(path, "w") as f:
        f.write(emit_report(report, fmt))
    log.info("wrote %s report to %s", fmt, path)


def rho_density_frame(report: ScenarioReport, bins: int = RHO_DENSITY_BINS) -> pd.DataFrame:
    """Histogram density of the kept rho draws per (n, regime), on the prior interval."""
    lo, hi = report.spec.rho_interval
    rows = []
    for (n, regime), draws in sorted(report.rho_draws.items()):
        density, edges = np.histogram(draws, bins=bins, range=(lo, hi), density=True)
        centers = (edges[:-1] + edges[1:]) / 2
        rows += [{"n": n, "regime": regime, "rho": c, "density": d} for c, d in zip(centers, density)]
    return pd.DataFrame(rows, columns=["n", "regime", "rho", "density"])


def rate_frame(table: pd.DataFrame) -> pd.DataFrame:
    """Log-log pairs of the rate study."""
    frame = table.copy()
    frame["log_n"] = np.log(frame["n"])
    frame["log_empirical_variance"] = np.log(frame["empirical_variance"])
    frame["log_approx_variance"] = np.log(frame["approx_variance"])
    return frame
