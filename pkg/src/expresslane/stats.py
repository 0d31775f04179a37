"""Correlation, autocorrelation, and plain OLS for the report tables.

Implementations are deliberately direct numpy so the test suite can check
them against independent oracles (naive formulas, exhaustive ranking,
pseudoinverse algebra). Standard errors are classical homoskedastic ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_POINTS = 3


class DegenerateVariance(ValueError):
    """Correlation undefined: one input has (near) zero variance."""


class SeriesTooShort(ValueError):
    pass


class RankDeficient(ValueError):
    pass


def _as_vec(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    return v


def pearson(x, y) -> float:
    """Sample Pearson correlation of two equal-length vectors (n >= 3)."""
    xv, yv = _as_vec(x, "x"), _as_vec(y, "y")
    if xv.size != yv.size:
        raise ValueError("x and y must have equal length")
    if xv.size < MIN_POINTS:
        raise SeriesTooShort(f"need at least {MIN_POINTS} points, got {xv.size}")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVariance("zero variance input")
    return float(np.dot(dx, dy) / (sx * sy))


def average_ranks(x) -> np.ndarray:
    """Ranks 1..n with ties receiving the average of their positions."""
    xv = _as_vec(x, "x")
    order = np.argsort(xv, kind="stable")
    ranks = np.empty(xv.size, dtype=np.float64)
    sorted_vals = xv[order]
    i = 0
    while i < xv.size:
        j = i
        while j + 1 < xv.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson of average-ranked data."""
    return pearson(average_ranks(x), average_ranks(y))


def autocorrelation(series, max_lag: int) -> list[tuple[int, float]]:
    """Lag-k Pearson between series[:-k] and series[k:], for k = 1..max_lag."""
    s = _as_vec(series, "series")
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if s.size <= max_lag + 2:
        raise SeriesTooShort(f"need length > max_lag + 2 = {max_lag + 2}, got {s.size}")
    return [(k, pearson(s[:-k], s[k:])) for k in range(1, max_lag + 1)]


@dataclass(frozen=True)
class RegressionResult:
    coefficients: np.ndarray  # intercept first when fitted with one
    std_errors: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    n_observations: int
    intercept: bool

    def __post_init__(self) -> None:
        if self.intercept and not -1e-12 <= self.r_squared <= 1 + 1e-12:
            raise ValueError(f"R^2 out of range: {self.r_squared}")


def ols(y, regressors, intercept: bool = True) -> RegressionResult:
    """Least squares of y on the given regressor columns.

    ``regressors`` is (n,) or (n, k). With an intercept, R^2 is centered and
    the F statistic tests the k slopes against the intercept-only model;
    without one, R^2 is the uncentered 1 - SSR/sum(y^2).
    """
    yv = _as_vec(y, "y")
    X = np.asarray(regressors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if yv.size != n:
        raise ValueError("y and regressors must have equal length")
    if intercept:
        X = np.column_stack([np.ones(n), X])
    p = X.shape[1]
    if n <= p:
        raise SeriesTooShort(f"need n > {p} observations, got {n}")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficient("regressor matrix is rank deficient")

    beta, _, _, _ = np.linalg.lstsq(X, yv, rcond=None)
    resid = yv - X @ beta
    ssr = float(resid @ resid)
    if intercept:
        sst = float(np.sum((yv - yv.mean()) ** 2))
    else:
        sst = float(yv @ yv)
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    dof = n - p
    sigma2 = ssr / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof if intercept else r2
    if r2 >= 1.0:
        f_stat = float("inf")
    else:
        f_stat = (r2 / k) / ((1.0 - r2) / dof)
    return RegressionResult(beta, se, r2, adj_r2, f_stat, n, intercept)
