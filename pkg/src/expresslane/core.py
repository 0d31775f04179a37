"""Shared domain types and round/window time arithmetic.

All timestamps are integer milliseconds from an opaque genesis origin;
rounds are one minute long and partition the timeline into half-open
intervals [start, start + 60s). ETH amounts are exact Decimals, USD
amounts are plain floats (analysis quantities, not ledger quantities).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal

# Milliseconds since genesis. Plain ints: total order and exact arithmetic
# come for free, sub-millisecond resolution is never needed.
TimePoint = int

ROUND_MS = 60_000
BID_CLOSE_GAP_MS = 15_000

DEFAULT_PAIR_UNIVERSE = (
    ("WETH", "USDC"),
    ("WETH", "USDT"),
    ("WBTC", "USDC"),
    ("WBTC", "USDT"),
    ("WBTC", "WETH"),
)


class TimeError(ValueError):
    """A timestamp violates a precondition (e.g. before genesis)."""


@dataclass(frozen=True)
class RoundSchedule:
    """Timing of one auction round: the minute it covers plus its bid window.

    Bidding for the minute [minute_start, minute_end) opens one minute
    earlier and closes 15 seconds before the minute starts, leaving the
    settlement gap.
    """

    round_number: int
    minute_start: TimePoint
    minute_end: TimePoint
    bidding_open: TimePoint
    bidding_close: TimePoint

    def __post_init__(self) -> None:
        if not (self.bidding_open < self.bidding_close < self.minute_start < self.minute_end):
            raise ValueError(
                f"round {self.round_number}: schedule times must be ordered "
                "open < close < start < end"
            )

    @classmethod
    def standard(cls, round_number: int, minute_start: TimePoint) -> "RoundSchedule":
        """Schedule with the deployed timings: 60s rounds, bids close at second 45."""
        return cls(
            round_number=round_number,
            minute_start=minute_start,
            minute_end=minute_start + ROUND_MS,
            bidding_open=minute_start - ROUND_MS,
            bidding_close=minute_start - BID_CLOSE_GAP_MS,
        )

    def contains(self, t: TimePoint) -> bool:
        return self.minute_start <= t < self.minute_end


@dataclass(frozen=True)
class Won:
    """Settled round with a qualifying winner."""

    winner_id: str
    highest_bid_eth: Decimal
    paid_eth: Decimal


class NoWinner:
    """Settled round where no bid met the reserve: ordering stays pure FCFS."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NoWinner"


NO_WINNER = NoWinner()

Outcome = Won | NoWinner


@dataclass(frozen=True)
class AuctionRound:
    """One minute of express-lane rights: schedule, live bids, settled outcome.

    Immutable; bid submission and settlement return updated copies.
    ``outcome is None`` means the round is not yet settled.
    """

    schedule: RoundSchedule
    bids: tuple = field(default_factory=tuple)  # tuple of auction.Bid
    outcome: Outcome | None = None

    def __post_init__(self) -> None:
        if isinstance(self.outcome, Won):
            if self.outcome.paid_eth > self.outcome.highest_bid_eth:
                raise ValueError(
                    f"round {self.schedule.round_number}: paid "
                    f"{self.outcome.paid_eth} exceeds highest bid "
                    f"{self.outcome.highest_bid_eth}"
                )

    @property
    def settled(self) -> bool:
        return self.outcome is not None

    @property
    def winner_id(self) -> str | None:
        return self.outcome.winner_id if isinstance(self.outcome, Won) else None

    def with_bids(self, bids: tuple) -> "AuctionRound":
        return replace(self, bids=bids)

    def with_outcome(self, outcome: Outcome) -> "AuctionRound":
        return replace(self, outcome=outcome)


@dataclass(frozen=True)
class FastLaneTransaction:
    """One DEX swap submitted through the fast lane by the round winner.

    ``amount_in`` of ``token_in`` was spent for ``amount_out`` of
    ``token_out``, net of pool fees; ``gas_fee_usd`` is the chain fee paid.
    """

    tx_id: str
    timestamp: TimePoint
    round_number: int
    winner_id: str
    token_in: str
    token_out: str
    amount_in: float
    amount_out: float
    gas_fee_usd: float

    def __post_init__(self) -> None:
        if self.token_in == self.token_out:
            raise ValueError(f"tx {self.tx_id}: token_in equals token_out")
        if self.amount_in < 0 or self.amount_out < 0 or self.gas_fee_usd < 0:
            raise ValueError(f"tx {self.tx_id}: negative amount or fee")


@dataclass(frozen=True)
class AssetPair:
    base: str
    quote: str

    def __post_init__(self) -> None:
        if self.base == self.quote:
            raise ValueError("pair base equals quote")

    def __str__(self) -> str:
        return f"{self.base}/{self.quote}"


def round_of(t: TimePoint, genesis: TimePoint, round_ms: int = ROUND_MS) -> int:
    """Round number containing time t. Rounds are half-open [start, start+60s)."""
    if t < genesis:
        raise TimeError(f"t={t} is before genesis={genesis}")
    return (t - genesis) // round_ms


def round_schedule(round_number: int, genesis: TimePoint) -> RoundSchedule:
    """Standard schedule of the given round for a timeline starting at genesis."""
    return RoundSchedule.standard(round_number, genesis + round_number * ROUND_MS)


def prefix_window(schedule: RoundSchedule, seconds: int) -> tuple[TimePoint, TimePoint]:
    """Half-open interval covering the first `seconds` of the round's minute."""
    if not 1 <= seconds <= 60:
        raise ValueError(f"prefix seconds must be in [1, 60], got {seconds}")
    return (schedule.minute_start, schedule.minute_start + seconds * 1000)
