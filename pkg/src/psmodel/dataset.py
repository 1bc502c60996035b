import logging
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from src.errors import DataError
from src.math_functions import least_squares

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("y", "t", "s")
TRUTH_COLUMNS = ("s0", "s1")
COVARIATE_PATTERN = re.compile(r"^x(\d+)$")


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed rows (Y, T, S, X) with optional simulated truth columns S(0), S(1)."""

    y: np.ndarray
    t: np.ndarray
    s: np.ndarray
    x: Optional[np.ndarray] = None
    s0: Optional[np.ndarray] = None
    s1: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.y)
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "s", _frozen(self.s))
        t = np.array(self.t, dtype=int)
        if t.shape != (n,) or not np.all((t == 0) | (t == 1)):
            raise DataError("t must be a 0/1 vector with one entry per row")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        if self.s.shape != (n,):
            raise DataError(f"s has {self.s.shape[0]} rows, y has {n}")

        x = np.empty((n, 0)) if self.x is None else np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != n:
            raise DataError(f"x has {x.shape[0]} rows, y has {n}")
        object.__setattr__(self, "x", _frozen(x))

        if (self.s0 is None) != (self.s1 is None):
            raise DataError("truth columns s0 and s1 come together")
        if self.s0 is not None:
            object.__setattr__(self, "s0", _frozen(self.s0))
            object.__setattr__(self, "s1", _frozen(self.s1))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def has_covariates(self) -> bool:
        return self.p > 0

    @property
    def has_truth(self) -> bool:
        return self.s0 is not None

    @property
    def x_names(self):
        return [f"x{j + 1}" for j in range(self.p)]

    def arm(self, t: int) -> np.ndarray:
        """Boolean mask of the rows in arm t."""
        return self.t == t

    def arm_sizes(self):
        n1 = int(self.t.sum())
        return self.n - n1, n1

    def is_binary(self) -> bool:
        return bool(np.all((self.s == 0) | (self.s == 1)))

    def check_fittable(self, min_per_arm: int = 1):
        n0, n1 = self.arm_sizes()
        if min(n0, n1) < min_per_arm:
            raise DataError(
                f"each arm needs at least {min_per_arm} rows, got n0={n0}, n1={n1}"
            )

    def with_metadata(self, **values):
        return Dataset(self.y, self.t, self.s, self.x, self.s0, self.s1, {**self.metadata, **values})

    def to_frame(self) -> pd.DataFrame:
        columns = {"y": self.y, "t": self.t, "s": self.s}
        for j, name in enumerate(self.x_names):
            columns[name] = self.x[:, j]
        if self.has_truth:
            columns["s0"] = self.s0
            columns["s1"] = self.s1
        return pd.DataFrame(columns)


def dataset_from_frame(frame: pd.DataFrame) -> Dataset:
    columns = list(frame.columns)
    for name in REQUIRED_COLUMNS:
        if name not in columns:
            raise DataError(f"missing required column '{name}'")

    covariates = []
    for name in columns:
        if name in REQUIRED_COLUMNS or name in TRUTH_COLUMNS:
            continue
        match = COVARIATE_PATTERN.match(name)
        if match is None:
            raise DataError(f"unexpected column '{name}' (expected y, t, s, x1..xp, s0, s1)")
        covariates.append((int(match.group(1)), name))
    covariates.sort()
    expected = [f"x{j + 1}" for j in range(len(covariates))]
    if [name for _, name in covariates] != expected:
        raise DataError(f"covariate columns must be x1..x{len(covariates)}, got {[c for _, c in covariates]}")

    for name in columns:
        values = pd.to_numeric(frame[name], errors="coerce")
        if values.isna().any():
            row = int(np.flatnonzero(values.isna().to_numpy())[0])
            raise DataError(f"column '{name}' has a missing or non-numeric value at row {row}")

    t = frame["t"].to_numpy(dtype=float)
    if not np.all((t == 0) | (t == 1)):
        raise DataError("column 't' must only contain 0 and 1")

    truth = {}
    present = [name for name in TRUTH_COLUMNS if name in columns]
    if len(present) == 1:
        raise DataError(f"column '{present[0]}' needs its partner truth column")
    if present:
        truth = {name: frame[name].to_numpy(dtype=float) for name in TRUTH_COLUMNS}

    x = frame[expected].to_numpy(dtype=float) if expected else None
    return Dataset(
        frame["y"].to_numpy(dtype=float),
        t.astype(int),
        frame["s"].to_numpy(dtype=float),
        x,
        **truth,
    )


def read_dataset(path) -> Dataset:
    """Reads a dataset CSV with headers y, t, s, x1..xp and optionally s0, s1 (any order)."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as err:
        raise DataError(f"dataset file not found: {path}") from err
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise DataError(f"cannot parse dataset {path}: {err}") from err
    data = dataset_from_frame(frame)
    log.info("read %d rows (%d covariates) from %s", data.n, data.p, path)
    return data


def write_dataset(data: Dataset, path):
    data.to_frame().to_csv(path, index=False, float_format="%.17g")
    log.info("wrote %d rows to %s", data.n, path)


def residualize(data: Dataset) -> Dataset:
    """Removes covariates: Y'(t) = Y - gamma_t^T X per arm and S' = S - alpha^T X pooled.

    The per arm outcome fit and the pooled strata fit (with arm intercepts) are ordinary
    least squares. Fitted coefficients land in metadata as gamma0, gamma1, alpha.
    """
    if not data.has_covariates:
        return data
    p = data.p
    y = data.y.copy()
    gammas = {}
    for t in (0, 1):
        mask = data.arm(t)
        if mask.sum() <= p + 2:
            raise DataError(f"arm {t} has {int(mask.sum())} rows, need more than {p + 2} to residualize")
        design = np.column_stack([np.ones(mask.sum()), data.x[mask]])
        coef, _ = least_squares(design, data.y[mask], ["intercept"] + data.x_names)
        gammas[t] = coef[1:]
        y[mask] = data.y[mask] - data.x[mask] @ coef[1:]

    arm_design = np.column_stack([1 - data.t, data.t, data.x])
    coef, _ = least_squares(arm_design, data.s, ["arm0", "arm1"] + data.x_names)
    alpha = coef[2:]
    shift = data.x @ alpha

    truth = {}
    if data.has_truth:
        truth = {"s0": data.s0 - shift, "s1": data.s1 - shift}
    metadata = {**data.metadata, "gamma0": gammas[0].tolist(), "gamma1": gammas[1].tolist(), "alpha": alpha.tolist()}
    return Dataset(y, data.t, data.s - shift, None, metadata=metadata, **truth)
