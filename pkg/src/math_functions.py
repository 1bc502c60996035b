from math import log, pi
from typing import Sequence, Tuple

import numpy as np

from src.errors import DataError

LOG_2PI = log(2 * pi)

sign = lambda x: int((x > 0)) - int((x < 0))


def sign_or_positive(x):
    """Like sign, but zero counts as positive (used when a sign has to be picked)."""
    return -1 if x < 0 else 1


def gaussian_logpdf(x, mean, var):
    """Elementwise log density of N(mean, var)."""
    x = np.asarray(x, dtype=float)
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def equal_tailed_interval(draws, level: float) -> Tuple[float, float]:
    """Equal tailed credible interval with linear (type 7) quantiles."""
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(np.asarray(draws, dtype=float), [tail, 1.0 - tail])
    return float(lo), float(hi)


def least_squares(design: np.ndarray, target: np.ndarray, column_names: Sequence[str]):
    """Ordinary least squares fit of target on the columns of design.

    Returns (coefficients, residuals). A rank deficient design raises DataError naming the
    columns that are linear combinations of the others.
    """
    design = np.asarray(design, dtype=float)
    target = np.asarray(target, dtype=float)
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise DataError(
            "rank deficient design, collinear columns: "
            + ", ".join(collinear_columns(design, column_names))
        )
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return coef, target - design @ coef


def collinear_columns(design: np.ndarray, column_names: Sequence[str]):
    """Greedy scan: a column is collinear if it does not raise the rank of the columns before it."""
    names = []
    kept = np.empty((design.shape[0], 0))
    for j, name in enumerate(column_names):
        candidate = np.column_stack([kept, design[:, j]])
        if np.linalg.matrix_rank(candidate) > kept.shape[1]:
            kept = candidate
        else:
            names.append(name)
    return names
