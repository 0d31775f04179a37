"""Sealed-bid second-price auction with a reserve price.

Settlement rules: no bid at or above the reserve leaves the round without
a winner (ordering stays pure FCFS); a single qualifying bid wins and pays
the reserve; with two or more, the highest bid wins and pays the second
highest qualifying amount. Amount ties break by earliest submission, then
bidder id, so replaying the same bid set always yields the same outcome.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .core import NO_WINNER, AuctionRound, TimePoint, Won

RESERVE_ETH = Decimal("0.001")


class AuctionError(ValueError):
    pass


class EarlyBid(AuctionError):
    pass


class LateBid(AuctionError):
    pass


class AlreadySettled(AuctionError):
    pass


class DoubleSettle(AuctionError):
    pass


@dataclass(frozen=True)
class AuctionConfig:
    reserve_eth: Decimal = RESERVE_ETH
    round_length_ms: int = 60_000
    settlement_gap_ms: int = 15_000

    def __post_init__(self) -> None:
        if self.reserve_eth <= 0:
            raise ValueError("reserve_eth must be positive")
        if not 0 < self.settlement_gap_ms < self.round_length_ms:
            raise ValueError("settlement gap must be positive and shorter than the round")


@dataclass(frozen=True)
class Bid:
    bidder_id: str
    amount_eth: Decimal
    submit_time: TimePoint

    def __post_init__(self) -> None:
        if self.amount_eth <= 0:
            raise ValueError(f"bid from {self.bidder_id}: amount must be positive")


def submit_bid(round_: AuctionRound, bid: Bid) -> AuctionRound:
    """Record a bid; a later bid from the same bidder replaces its earlier one.

    The window is closed-closed: a bid exactly at bidding_close is accepted.
    """
    if round_.settled:
        raise AlreadySettled(f"round {round_.schedule.round_number} already settled")
    if bid.submit_time < round_.schedule.bidding_open:
        raise EarlyBid(
            f"bid at {bid.submit_time} before bidding opens at {round_.schedule.bidding_open}"
        )
    if bid.submit_time > round_.schedule.bidding_close:
        raise LateBid(
            f"bid at {bid.submit_time} after bidding closed at {round_.schedule.bidding_close}"
        )
    kept = tuple(b for b in round_.bids if b.bidder_id != bid.bidder_id)
    return round_.with_bids(kept + (bid,))


def settle(round_: AuctionRound, config: AuctionConfig = AuctionConfig()) -> AuctionRound:
    """Settle a round once. Bids below the reserve stay recorded but never win."""
    if round_.settled:
        raise DoubleSettle(f"round {round_.schedule.round_number} settled twice")
    qualifying = sorted(
        (b for b in round_.bids if b.amount_eth >= config.reserve_eth),
        key=lambda b: (-b.amount_eth, b.submit_time, b.bidder_id),
    )
    if not qualifying:
        return round_.with_outcome(NO_WINNER)
    winner = qualifying[0]
    if len(qualifying) == 1:
        paid = config.reserve_eth
    else:
        paid = qualifying[1].amount_eth
    return round_.with_outcome(Won(winner.bidder_id, winner.amount_eth, paid))
