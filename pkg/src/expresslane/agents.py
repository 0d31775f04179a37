"""Bidder strategies and the fast-lane arbitrageur.

The conditional-on-winning bid for a common-value second-price auction is
E[V | X_i = x, max_{j != i} X_j <= x]: the bidder's value estimate given
its own signal and given that every rival signal is weakly lower. With any
signal noise this sits strictly below the unconditional estimate
E[V | X_i = x] (winning is bad news), which is the winner's-curse shading
this module exposes for measurement.

Signals are multiplicative: X_i = V * eps_i with i.i.d. noise. Two signal
structures are supported: lognormal value and noise (heavy-tailed positive
values, Gaussian conjugacy in logs), and finite discrete grids for exact
enumeration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .amm import Direction, Pool, optimal_arb, swap_exact_in
from .core import FastLaneTransaction, TimePoint
from .prices import PriceSeries, mid_at

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(160)


class NonPositiveSignal(ValueError):
    pass


@dataclass(frozen=True)
class LognormalDist:
    """ln Z ~ N(mu, sigma^2); sigma = 0 degenerates to the point exp(mu)."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class DiscreteDist:
    """Finite positive support with probabilities summing to one."""

    values: tuple
    probs: tuple

    def __post_init__(self) -> None:
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be non-empty and equal length")
        if any(v <= 0 for v in self.values):
            raise ValueError("support must be positive")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("probs must be non-negative and sum to 1")

    def cdf(self, u: float) -> float:
        return sum(p for v, p in zip(self.values, self.probs) if v <= u)


Dist = LognormalDist | DiscreteDist


@dataclass(frozen=True)
class SignalModel:
    """Common value V ~ value_dist observed through X_i = V * eps_i."""

    n_bidders: int
    value_dist: Dist
    noise_dist: Dist

    def __post_init__(self) -> None:
        if self.n_bidders < 1:
            raise ValueError("n_bidders must be >= 1")
        if isinstance(self.value_dist, LognormalDist) != isinstance(
            self.noise_dist, LognormalDist
        ):
            raise ValueError("value and noise distributions must be the same kind")

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.value_dist, DiscreteDist)


@dataclass(frozen=True)
class BidEstimate:
    value: float
    stderr: float
    n_samples: int


def _log_posterior(model: SignalModel, x: float) -> tuple[float, float]:
    """Mean and sd of ln V given X_i = x under the lognormal model."""
    vd: LognormalDist = model.value_dist
    nd: LognormalDist = model.noise_dist
    sv2, se2 = vd.sigma**2, nd.sigma**2
    if sv2 == 0.0:
        return vd.mu, 0.0
    w = sv2 / (sv2 + se2)
    m = vd.mu + w * (math.log(x) - nd.mu - vd.mu)
    s = math.sqrt(sv2 * se2 / (sv2 + se2))
    return m, s


def _win_weight(model: SignalModel, x: float, ln_v: np.ndarray) -> np.ndarray:
    """P(max of n-1 rival signals <= x | V = exp(ln_v))."""
    nd: LognormalDist = model.noise_dist
    n1 = model.n_bidders - 1
    if n1 == 0:
        return np.ones_like(ln_v)
    if nd.sigma == 0.0:
        return (nd.mu + ln_v <= math.log(x) + 1e-15).astype(float)
    d = (math.log(x) - nd.mu - ln_v) / nd.sigma
    return norm.cdf(d) ** n1


def _discrete_conditional(
    model: SignalModel, x: float, win_condition: bool
) -> tuple[float, float]:
    """(numerator, denominator) of E[V | X_i = x(, win)] over the joint grid."""
    vd: DiscreteDist = model.value_dist
    nd: DiscreteDist = model.noise_dist
    n1 = model.n_bidders - 1
    num = den = 0.0
    for v, pv in zip(vd.values, vd.probs):
        for e, pe in zip(nd.values, nd.probs):
            if not math.isclose(v * e, x, rel_tol=1e-9):
                continue
            w = pv * pe
            if win_condition and n1 > 0:
                w *= nd.cdf(x / v * (1 + 1e-12)) ** n1
            num += v * w
            den += w
    if den == 0.0:
        raise ValueError(f"signal x={x} is outside the discrete model's support")
    return num, den


def naive_value(x: float, model: SignalModel) -> float:
    """Unconditional value estimate E[V | X_i = x] (no winning condition)."""
    if x <= 0:
        raise NonPositiveSignal(f"signal must be positive, got {x}")
    if model.is_discrete:
        num, den = _discrete_conditional(model, x, win_condition=False)
        return num / den
    m, s = _log_posterior(model, x)
    return math.exp(m + 0.5 * s * s)


def mw_bid(
    x: float,
    model: SignalModel,
    method: str = "quadrature",
    rel_tol: float = 0.005,
    seed: int = 0,
) -> float:
    """Conditional-on-winning bid E[V | X_i = x, max_{j != i} X_j <= x]."""
    return mw_bid_estimate(x, model, method=method, rel_tol=rel_tol, seed=seed).value


def mw_bid_estimate(
    x: float,
    model: SignalModel,
    method: str = "quadrature",
    rel_tol: float = 0.005,
    seed: int = 0,
    max_samples: int = 1 << 21,
) -> BidEstimate:
    """Like mw_bid but reporting the estimator's standard error.

    Discrete models are enumerated exactly. Lognormal models integrate the
    Gaussian log-value posterior either by Gauss-Hermite quadrature
    (deterministic, stderr ~ 0) or by Monte Carlo with draws doubling until
    the relative standard error drops below rel_tol; draws are a fixed
    function of the seed, so a shared seed gives common random numbers
    across grid points.
    """
    if x <= 0:
        raise NonPositiveSignal(f"signal must be positive, got {x}")
    if model.n_bidders < 2:
        raise ValueError("mw_bid requires at least 2 bidders")
    if model.is_discrete:
        num, den = _discrete_conditional(model, x, win_condition=True)
        return BidEstimate(num / den, 0.0, 0)

    nd: LognormalDist = model.noise_dist
    if nd.sigma == 0.0:  # signals reveal V exactly
        return BidEstimate(x, 0.0, 0)
    m, s = _log_posterior(model, x)
    if s == 0.0:  # degenerate prior: value is known
        return BidEstimate(math.exp(m), 0.0, 0)

    if method == "quadrature":
        ln_v = m + math.sqrt(2.0) * s * _GH_NODES
        q = _win_weight(model, x, ln_v)
        num = float(np.sum(_GH_WEIGHTS * np.exp(ln_v) * q))
        den = float(np.sum(_GH_WEIGHTS * q))
        return BidEstimate(num / den, 0.0, _GH_NODES.size)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")

    rng = np.random.default_rng(seed)
    n = 8192
    z = rng.standard_normal(n)
    while True:
        ln_v = m + s * z
        q = _win_weight(model, x, ln_v)
        a = np.exp(ln_v) * q
        q_bar = q.mean()
        if q_bar <= 0:
            raise ArithmeticError("win probability underflowed; signal far below support")
        ratio = a.mean() / q_bar
        # delta-method stderr of the ratio estimator
        resid = a - ratio * q
        se = float(np.std(resid, ddof=1) / (q_bar * math.sqrt(z.size)))
        if se <= rel_tol * abs(ratio) or z.size >= max_samples:
            return BidEstimate(float(ratio), se, int(z.size))
        z = np.concatenate([z, rng.standard_normal(z.size)])


def pivotal_bid(x: float, model: SignalModel) -> float:
    """Classical symmetric-equilibrium bid E[V | X_i = x, max rival signal = x].

    Conditions on being exactly pivotal rather than merely winning; kept as
    a comparison variant.
    """
    if x <= 0:
        raise NonPositiveSignal(f"signal must be positive, got {x}")
    if model.n_bidders < 2:
        raise ValueError("pivotal_bid requires at least 2 bidders")
    if model.is_discrete:
        vd: DiscreteDist = model.value_dist
        nd: DiscreteDist = model.noise_dist
        n1 = model.n_bidders - 1
        num = den = 0.0
        for v, pv in zip(vd.values, vd.probs):
            for e, pe in zip(nd.values, nd.probs):
                if not math.isclose(v * e, x, rel_tol=1e-9):
                    continue
                at_most = nd.cdf(x / v * (1 + 1e-12)) ** n1
                below = nd.cdf(x / v * (1 - 1e-12)) ** n1
                w = pv * pe * (at_most - below)
                num += v * w
                den += w
        if den == 0.0:
            raise ValueError(f"no rival signal can tie x={x} under the discrete model")
        return num / den

    nd = model.noise_dist
    if nd.sigma == 0.0:
        return x
    m, s = _log_posterior(model, x)
    if s == 0.0:
        return math.exp(m)
    ln_v = m + math.sqrt(2.0) * s * _GH_NODES
    d = (math.log(x) - nd.mu - ln_v) / nd.sigma
    n1 = model.n_bidders - 1
    # density of the rival maximum at x; x-constant factors cancel in the ratio
    q = (norm.cdf(d) ** (n1 - 1)) * norm.pdf(d)
    num = float(np.sum(_GH_WEIGHTS * np.exp(ln_v) * q))
    den = float(np.sum(_GH_WEIGHTS * q))
    return num / den


def adaptive_bid(
    prev_minute_markout_usd: float | None,
    eth_usd_price: float,
    alpha: float,
    beta: float,
) -> float:
    """Next-round bid in ETH from the previous minute's observed markout.

    bid = max(0, alpha * prev_markout / eth_usd + beta); a missing first
    observation falls back to beta alone.
    """
    if eth_usd_price <= 0:
        raise ValueError("eth_usd_price must be positive")
    if prev_minute_markout_usd is None:
        return max(0.0, beta)
    return max(0.0, alpha * prev_minute_markout_usd / eth_usd_price + beta)


# --- strategy objects stepped by the scenario runner -----------------------


@dataclass
class BidContext:
    """What a bidder can see when it bids: public history, no future data."""

    round_number: int
    prev_minute_variance: float
    prev_winner_markout_usd: float | None
    eth_usd: float


class MWConditional:
    """Common-value bidder: signal = value_scale * prev-minute variance * noise."""

    def __init__(self, model: SignalModel, value_scale: float, method: str = "quadrature"):
        self.model = model
        self.value_scale = value_scale
        self.method = method

    def bid_eth(self, ctx: BidContext, rng: np.random.Generator) -> float:
        base = self.value_scale * ctx.prev_minute_variance
        if base <= 0.0:
            return 0.0
        nd = self.model.noise_dist
        eps = math.exp(nd.mu + nd.sigma * rng.standard_normal()) if isinstance(
            nd, LognormalDist
        ) else float(rng.choice(nd.values, p=nd.probs))
        signal = base * eps
        value_usd = mw_bid(signal, self.model, method=self.method)
        return value_usd / ctx.eth_usd


class AdaptivePrev:
    """Bids a scaled copy of the previous minute's observed winner markout."""

    def __init__(self, alpha: float, beta: float):
        self.alpha = alpha
        self.beta = beta

    def bid_eth(self, ctx: BidContext, rng: np.random.Generator) -> float:
        return adaptive_bid(ctx.prev_winner_markout_usd, ctx.eth_usd, self.alpha, self.beta)


class ConstantNoise:
    """Uninformed bidder: mean plus uniform jitter, in ETH."""

    def __init__(self, mean_eth: float, jitter_eth: float = 0.0):
        self.mean_eth = mean_eth
        self.jitter_eth = jitter_eth

    def bid_eth(self, ctx: BidContext, rng: np.random.Generator) -> float:
        return max(0.0, self.mean_eth + self.jitter_eth * (2.0 * rng.random() - 1.0))


BidderStrategy = MWConditional | AdaptivePrev | ConstantNoise


# --- fast-lane arbitrage ----------------------------------------------------


def arbitrageur_step(
    pool: Pool,
    external: PriceSeries,
    t: TimePoint,
    latency_ms: int = 50,
    gas_fee_usd: float = 0.0,
    quote_usd: float = 1.0,
    tx_id: str = "tx",
    round_number: int = 0,
    winner_id: str = "winner",
) -> tuple[FastLaneTransaction, Pool] | None:
    """One reaction of the lane holder at time t against its pool.

    Observes the external mid as of t - latency_ms (its own reaction lag),
    sizes the optimal arbitrage, and executes it immediately (express lane:
    no sequencing delay). Returns the recorded fast-lane transaction and the
    updated pool, or None when the price sits inside the no-trade band or
    the expected edge does not cover gas.
    """
    price = mid_at(external, t - latency_ms)
    trade = optimal_arb(pool, price)
    if trade is None or trade.profit_quote * quote_usd <= gas_fee_usd:
        return None
    buy_base = trade.direction is Direction.BUY_BASE
    amount_out, new_pool = swap_exact_in(pool, trade.amount_in, buy_base)
    token_in = pool.pair.quote if buy_base else pool.pair.base
    token_out = pool.pair.base if buy_base else pool.pair.quote
    tx = FastLaneTransaction(
        tx_id=tx_id,
        timestamp=t,
        round_number=round_number,
        winner_id=winner_id,
        token_in=token_in,
        token_out=token_out,
        amount_in=trade.amount_in,
        amount_out=amount_out,
        gas_fee_usd=gas_fee_usd,
    )
    return tx, new_pool
