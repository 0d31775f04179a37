"""Constant-product pools with input fees and the optimal single-swap arbitrage.

Swaps follow the Uniswap-v2 convention: the fee is charged on the input
amount and the full input (fee included) joins the reserves, so the reserve
product never decreases. The arbitrage trade size against an external price
has a closed form; a numeric search over trade size is kept in the tests as
an independent reference.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .core import AssetPair


class EmptyPool(ValueError):
    pass


class Direction(enum.Enum):
    BUY_BASE = "buy_base"
    SELL_BASE = "sell_base"


@dataclass(frozen=True)
class Pool:
    pair: AssetPair
    reserve_base: float
    reserve_quote: float
    fee: float = 0.003

    def __post_init__(self) -> None:
        if self.reserve_base <= 0 or self.reserve_quote <= 0:
            raise EmptyPool(f"{self.pair}: reserves must be positive")
        if not 0 <= self.fee <= 0.1:
            raise ValueError(f"{self.pair}: fee must be in [0, 0.1]")

    @property
    def spot(self) -> float:
        """Marginal price of base in quote, before fees."""
        return self.reserve_quote / self.reserve_base

    def no_trade_band(self) -> tuple[float, float]:
        """External-price interval within which the fee defeats arbitrage."""
        return (self.spot * (1.0 - self.fee), self.spot / (1.0 - self.fee))


@dataclass(frozen=True)
class ArbTrade:
    direction: Direction
    amount_in: float
    amount_out: float
    pool_price_after: float
    profit_quote: float  # both legs valued at the external price


def swap_exact_in(pool: Pool, amount_in: float, buy_base: bool) -> tuple[float, Pool]:
    """Swap a fixed input against the pool; returns (amount_out, updated pool).

    buy_base=True spends quote for base; False spends base for quote.
    out = R_out * g * x / (R_in + g * x) with g = 1 - fee.
    """
    if amount_in <= 0:
        raise ValueError("amount_in must be positive")
    g = 1.0 - pool.fee
    if buy_base:
        r_in, r_out = pool.reserve_quote, pool.reserve_base
    else:
        r_in, r_out = pool.reserve_base, pool.reserve_quote
    amount_out = r_out * g * amount_in / (r_in + g * amount_in)
    if buy_base:
        new = replace(pool, reserve_quote=r_in + amount_in, reserve_base=r_out - amount_out)
    else:
        new = replace(pool, reserve_base=r_in + amount_in, reserve_quote=r_out - amount_out)
    return amount_out, new


def optimal_arb(pool: Pool, external_price: float) -> ArbTrade | None:
    """Profit-maximizing single swap against an external price, or None.

    Profit values base legs at the external price and quote legs at par.
    Buying base until the marginal pool price meets the external price gives
    x* = (sqrt(P*Rb*Rq*g) - Rq)/g quote in (and symmetrically for selling),
    which is positive exactly when the price sits outside the no-trade band.
    """
    if external_price <= 0:
        raise ValueError("external_price must be positive")
    g = 1.0 - pool.fee
    lo, hi = pool.no_trade_band()
    if lo <= external_price <= hi:
        return None
    rb, rq = pool.reserve_base, pool.reserve_quote
    if external_price > hi:
        direction = Direction.BUY_BASE
        amount_in = (math.sqrt(external_price * rb * rq * g) - rq) / g
    else:
        direction = Direction.SELL_BASE
        amount_in = (math.sqrt(rq * rb * g / external_price) - rb) / g
    if amount_in <= 0.0:  # band boundary up to rounding
        return None
    amount_out, new_pool = swap_exact_in(pool, amount_in, direction is Direction.BUY_BASE)
    if direction is Direction.BUY_BASE:
        profit = external_price * amount_out - amount_in
    else:
        profit = amount_out - external_price * amount_in
    if profit <= 0.0:
        return None
    return ArbTrade(direction, amount_in, amount_out, new_pool.spot, profit)


def apply_arb(pool: Pool, trade: ArbTrade) -> Pool:
    """Pool state after executing a trade produced by optimal_arb."""
    _, new_pool = swap_exact_in(pool, trade.amount_in, trade.direction is Direction.BUY_BASE)
    return new_pool
