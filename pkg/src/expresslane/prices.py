"""Mid-price paths with mean-reverting stochastic volatility.

The variance model is an exponential Ornstein-Uhlenbeck process on
log-variance, Euler-discretized at the tick interval:

    v[k+1] = v[k] + kappa*(theta - v[k])*dt + xi*sqrt(dt)*Z1[k]
    log p[k+1] = log p[k] + drift*dt + exp(v[k]/2)*sqrt(dt)*Z2[k]

with dt in seconds. Log-variance keeps sigma positive without reflection
tricks. Paths are deterministic for a fixed 64-bit seed (numpy PCG64);
the contract is same build + same seed = same path.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core import TimePoint

DEFAULT_TICK_MS = 1000
DEFAULT_STALENESS_MS = 10_000


class BeforeFirstTick(LookupError):
    """Price requested before the series starts."""


class StaleTickWarning(UserWarning):
    """The tick backing a lookup is older than the staleness bound."""


@dataclass(frozen=True)
class VolModelParams:
    """Parameters of the log-variance OU process, all rates per second.

    ``theta`` is the long-run mean of log per-second variance of log price,
    so a constant-volatility path (xi=0, v0=theta) realizes about
    exp(theta)*60 of variance per minute. ``fixed_sigma`` short-circuits
    the OU dynamics entirely (used for constant-sigma scaling runs and the
    degenerate sigma=0 case).
    """

    kappa: float
    theta: float
    xi: float
    v0: float
    drift: float = 0.0
    fixed_sigma: float | None = None

    def __post_init__(self) -> None:
        if self.kappa < 0 or self.xi < 0:
            raise ValueError("kappa and xi must be non-negative")
        if self.fixed_sigma is not None and self.fixed_sigma < 0:
            raise ValueError("fixed_sigma must be non-negative")

    @classmethod
    def constant(cls, sigma: float, drift: float = 0.0) -> "VolModelParams":
        return cls(kappa=0.0, theta=0.0, xi=0.0, v0=0.0, drift=drift, fixed_sigma=sigma)


class PriceSeries:
    """Time-sorted 1-second (by default) mid-price ticks for one asset."""

    def __init__(self, asset: str, timestamps, prices, tick_interval_ms: int = DEFAULT_TICK_MS):
        ts = np.asarray(timestamps, dtype=np.int64)
        px = np.asarray(prices, dtype=np.float64)
        if ts.ndim != 1 or ts.shape != px.shape:
            raise ValueError("timestamps and prices must be 1-D and equal length")
        if ts.size == 0:
            raise ValueError(f"{asset}: empty price series")
        if np.any(np.diff(ts) <= 0):
            raise ValueError(f"{asset}: timestamps must be strictly increasing")
        if np.any(px <= 0):
            raise ValueError(f"{asset}: all prices must be positive")
        self.asset = asset
        self.timestamps = ts
        self.prices = px
        self.tick_interval_ms = tick_interval_ms
        self.timestamps.setflags(write=False)
        self.prices.setflags(write=False)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PriceSeries)
            and self.asset == other.asset
            and self.tick_interval_ms == other.tick_interval_ms
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.prices, other.prices)
        )

    def __repr__(self) -> str:
        return (
            f"PriceSeries({self.asset!r}, n={len(self)}, "
            f"[{self.timestamps[0]}..{self.timestamps[-1]}])"
        )


def mid_at(
    series: PriceSeries,
    t: TimePoint,
    staleness_ms: int = DEFAULT_STALENESS_MS,
) -> float:
    """Mid price at time t: the last tick at or before t (previous-tick rule).

    Warns with StaleTickWarning when the backing tick is older than
    ``staleness_ms``; raises BeforeFirstTick when t precedes the series.
    """
    idx = int(np.searchsorted(series.timestamps, t, side="right")) - 1
    if idx < 0:
        raise BeforeFirstTick(
            f"{series.asset}: t={t} before first tick {series.timestamps[0]}"
        )
    if t - series.timestamps[idx] > staleness_ms:
        warnings.warn(
            f"{series.asset}: tick at {series.timestamps[idx]} is stale for lookup at {t}",
            StaleTickWarning,
            stacklevel=2,
        )
    return float(series.prices[idx])


@dataclass(frozen=True)
class VarianceSeries:
    """Per-window realized variance (sum of squared log returns)."""

    asset: str
    window_ms: int
    origin: TimePoint
    starts: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return int(self.values.size)


def realized_variance(
    series: PriceSeries,
    window_ms: int,
    origin: TimePoint | None = None,
) -> VarianceSeries:
    """Realized variance per non-overlapping window aligned to ``origin``.

    Each consecutive-tick squared log return is assigned to the window
    containing its *ending* tick, which makes window sums add up exactly
    across adjacent windows. Windows with no returns report 0.
    """
    if window_ms % series.tick_interval_ms != 0:
        raise ValueError("window_ms must be a multiple of the tick interval")
    if window_ms < 2 * series.tick_interval_ms:
        raise ValueError("window shorter than two ticks")
    if origin is None:
        origin = int(series.timestamps[0])

    r2 = np.diff(np.log(series.prices)) ** 2
    ends = series.timestamps[1:]
    keep = ends >= origin
    r2, ends = r2[keep], ends[keep]
    last = int(series.timestamps[-1])
    n_windows = max((last - origin) // window_ms + 1, 0) if last >= origin else 0
    if n_windows == 0:
        return VarianceSeries(series.asset, window_ms, origin,
                              np.empty(0, dtype=np.int64), np.empty(0))
    idx = (ends - origin) // window_ms
    values = np.bincount(idx, weights=r2, minlength=n_windows)
    starts = origin + window_ms * np.arange(n_windows, dtype=np.int64)
    return VarianceSeries(series.asset, window_ms, origin, starts, values)


def _ar1(a: float, x0: float, shocks: np.ndarray) -> np.ndarray:
    """x[k+1] = a*x[k] + shocks[k], returned including x[0] = x0."""
    driver = np.concatenate(([x0], shocks))
    return lfilter([1.0], [1.0, -a], driver)


def _sigma_path(params: VolModelParams, n_steps: int, dt: float, z1: np.ndarray) -> np.ndarray:
    if params.fixed_sigma is not None:
        return np.full(n_steps, params.fixed_sigma)
    a = 1.0 - params.kappa * dt
    if not -1.0 < a <= 1.0:
        raise ValueError(f"kappa*dt = {params.kappa * dt:.3g} too large for stable Euler steps")
    shocks = params.kappa * params.theta * dt + params.xi * np.sqrt(dt) * z1[: n_steps - 1]
    v = _ar1(a, params.v0, shocks)
    return np.exp(v / 2.0)


def simulate_path(
    params: VolModelParams,
    p0: float,
    horizon_ms: int,
    seed: int,
    asset: str = "ASSET",
    tick_interval_ms: int = DEFAULT_TICK_MS,
    start_ms: TimePoint = 0,
) -> PriceSeries:
    """Simulate one mid-price path with ticks at start, start+dt, ..., start+horizon."""
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    if horizon_ms % tick_interval_ms != 0:
        raise ValueError("horizon must be divisible by the tick interval")
    rng = np.random.default_rng(seed)
    n = horizon_ms // tick_interval_ms + 1
    dt = tick_interval_ms / 1000.0
    z1 = rng.standard_normal(max(n - 1, 0))
    z2 = rng.standard_normal(max(n - 1, 0))
    sigma = _sigma_path(params, n, dt, z1)
    increments = params.drift * dt + sigma[:-1] * np.sqrt(dt) * z2
    logp = np.log(p0) + np.concatenate(([0.0], np.cumsum(increments)))
    ts = start_ms + tick_interval_ms * np.arange(n, dtype=np.int64)
    return PriceSeries(asset, ts, np.exp(logp), tick_interval_ms)


def simulate_correlated_paths(
    specs: dict[str, tuple[VolModelParams, float]],
    horizon_ms: int,
    seed: int,
    correlation: np.ndarray | None = None,
    tick_interval_ms: int = DEFAULT_TICK_MS,
    start_ms: TimePoint = 0,
) -> dict[str, PriceSeries]:
    """Simulate several assets with correlated per-tick price shocks.

    ``specs`` maps asset -> (params, p0); ``correlation`` is the return
    correlation matrix in the same asset order (identity when omitted).
    Volatility shocks stay independent across assets.
    """
    assets = list(specs)
    m = len(assets)
    if correlation is None:
        chol = np.eye(m)
    else:
        corr = np.asarray(correlation, dtype=float)
        if corr.shape != (m, m):
            raise ValueError(f"correlation must be {m}x{m}")
        chol = np.linalg.cholesky(corr)  # raises on non-PSD input

    rng = np.random.default_rng(seed)
    n = horizon_ms // tick_interval_ms + 1
    dt = tick_interval_ms / 1000.0
    z1 = rng.standard_normal((m, max(n - 1, 0)))
    z2 = chol @ rng.standard_normal((m, max(n - 1, 0)))

    out: dict[str, PriceSeries] = {}
    for i, asset in enumerate(assets):
        params, p0 = specs[asset]
        if p0 <= 0:
            raise ValueError(f"{asset}: p0 must be positive")
        sigma = _sigma_path(params, n, dt, z1[i])
        increments = params.drift * dt + sigma[:-1] * np.sqrt(dt) * z2[i]
        logp = np.log(p0) + np.concatenate(([0.0], np.cumsum(increments)))
        ts = start_ms + tick_interval_ms * np.arange(n, dtype=np.int64)
        out[asset] = PriceSeries(asset, ts, np.exp(logp), tick_interval_ms)
    return out
