"""Log-log slope fits and replicate bootstrap intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .seeding import as_rng


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    n_points: int
    n_replicates: int
    range: tuple[float, float]


def fit_loglog(samples: Iterable[tuple[float, float]], n_replicates: int = 1) -> ExponentFit:
    """Ordinary least squares of log y on log x."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise InsufficientDataError("need at least 3 (x, y) samples")
    x, y = arr[:, 0], arr[:, 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive x and y")
    if np.unique(x).size < 2:
        raise InsufficientDataError("all x values are equal")
    if np.unique(x).size < 3:
        raise InsufficientDataError("need at least 3 distinct x values")
    lx, ly = np.log(x), np.log(y)
    mx = lx.mean()
    sxx = float(((lx - mx) ** 2).sum())
    slope = float(((lx - mx) * (ly - ly.mean())).sum() / sxx)
    intercept = float(ly.mean() - slope * mx)
    resid = ly - (intercept + slope * lx)
    dof = len(x) - 2
    stderr = math.sqrt(float((resid**2).sum()) / dof / sxx) if dof > 0 else 0.0
    return ExponentFit(slope, intercept, stderr, len(x), n_replicates, (float(x.min()), float(x.max())))


def replicate_ci(
    values: Sequence[float] | Sequence[ExponentFit],
    level: float = 0.95,
    resamples: int = 2000,
    seed=0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of replicate-level slopes."""
    if not 0.5 < level < 1.0:
        raise DomainError(f"level={level} must lie in (0.5, 1)")
    slopes = np.array([v.slope if isinstance(v, ExponentFit) else v for v in values], dtype=float)
    if slopes.size < 10:
        raise InsufficientDataError(f"need at least 10 replicates, got {slopes.size}")
    rng = as_rng(seed)
    idx = rng.integers(0, slopes.size, size=(resamples, slopes.size))
    means = slopes[idx].mean(axis=1)
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def d_from_lgd_slope(slope: float, stderr: float = 0.0) -> tuple[float, float]:
    """Dimension from the distance exponent 1/d, with a delta-method standard error."""
    if not slope > 0:
        raise DomainError(f"slope={slope} must be positive")
    return 1.0 / slope, stderr / (slope * slope)
