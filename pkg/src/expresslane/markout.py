"""Fixed-time markout profits, positive filtering, and bid/markout pairing.

A transaction's markout is the USD value of the tokens it received minus
the USD value of the tokens it spent, both at external mid prices a fixed
time after execution, minus the chain gas fee:

    profit = p_out(t + m) * amount_out - p_in(t + m) * amount_in - gas_fee

The default markout time m is 5 seconds. Aggregations attribute full-minute
sums to the round winner; multi-minute blocks mix winners and pair against
the summed per-round bids.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, NamedTuple, Sequence

from .core import AuctionRound, FastLaneTransaction, TimePoint, Won
from .prices import BeforeFirstTick, PriceSeries, mid_at
from .stats import SeriesTooShort

DEFAULT_MARKOUT_MS = 5000
DEFAULT_SWEEP_MS = range(2000, 10001, 1000)
DEFAULT_STABLE_VALUES = {"USDC": 1.0, "USDT": 1.0}


class MissingPrice(LookupError):
    """No usable mid price for an asset at the markout instant."""


class UnknownRound(KeyError):
    pass


class PriceBook:
    """USD mid-price lookup across assets, with stablecoin fallbacks.

    Assets without a tick series but listed in ``stable_values`` are priced
    at that constant (default: USDC and USDT at 1.0).
    """

    def __init__(
        self,
        series: dict[str, PriceSeries] | None = None,
        stable_values: dict[str, float] | None = None,
    ):
        self.series = dict(series or {})
        self.stable_values = DEFAULT_STABLE_VALUES.copy() if stable_values is None else dict(stable_values)

    def price_at(self, symbol: str, t: TimePoint) -> float:
        if symbol in self.series:
            try:
                return mid_at(self.series[symbol], t)
            except BeforeFirstTick as exc:
                raise MissingPrice(str(exc)) from exc
        if symbol in self.stable_values:
            return self.stable_values[symbol]
        raise MissingPrice(f"no price series or stable value for {symbol!r}")


@dataclass(frozen=True)
class MarkoutRecord:
    tx_id: str
    winner_id: str
    timestamp: TimePoint
    round_number: int
    profit_usd: float
    markout_time_ms: int

    def __post_init__(self) -> None:
        if self.markout_time_ms < 0:
            raise ValueError("markout_time_ms must be non-negative")


def markout(
    tx: FastLaneTransaction,
    prices: PriceBook,
    m_ms: int = DEFAULT_MARKOUT_MS,
) -> MarkoutRecord:
    """Markout profit of one transaction at markout time m_ms."""
    t = tx.timestamp + m_ms
    p_out = prices.price_at(tx.token_out, t)
    p_in = prices.price_at(tx.token_in, t)
    profit = p_out * tx.amount_out - p_in * tx.amount_in - tx.gas_fee_usd
    return MarkoutRecord(tx.tx_id, tx.winner_id, tx.timestamp, tx.round_number, profit, m_ms)


def compute_markouts(
    txs: Iterable[FastLaneTransaction],
    prices: PriceBook,
    m_ms: int = DEFAULT_MARKOUT_MS,
) -> tuple[list[MarkoutRecord], int]:
    """Markouts for a batch; transactions with missing prices are dropped.

    Returns (records, dropped_count); dropped rows are counted, never
    zero-filled.
    """
    records: list[MarkoutRecord] = []
    dropped = 0
    for tx in txs:
        try:
            records.append(markout(tx, prices, m_ms))
        except MissingPrice:
            dropped += 1
    return records, dropped


def filter_positive(records: Sequence[MarkoutRecord]) -> list[MarkoutRecord]:
    """Keep records with strictly positive profit (idempotent)."""
    return [r for r in records if r.profit_usd > 0.0]


@dataclass(frozen=True)
class AggregateSeries:
    """Per-window markout sums, time-ordered and aligned to round boundaries."""

    kind: str  # "minute" | "prefix" | "block"
    window_ids: tuple[int, ...]
    start_ts: tuple[TimePoint, ...]
    winners: tuple  # winner id per window; None for mixed-winner blocks
    sums_usd: tuple[float, ...]
    filtered: bool
    block_minutes: int = 1
    prefix_seconds: int | None = None

    def __len__(self) -> int:
        return len(self.window_ids)


def _round_map(rounds: Sequence[AuctionRound]) -> dict[int, AuctionRound]:
    return {r.schedule.round_number: r for r in rounds}


def aggregate(
    records: Sequence[MarkoutRecord],
    rounds: Sequence[AuctionRound],
    prefix_seconds: int | None = None,
    block_minutes: int | None = None,
    filtered: bool = False,
    winner: str | None = None,
    include_idle: bool = True,
) -> AggregateSeries:
    """Per-window markout sums over the given rounds.

    Default windows are the full minutes of won rounds, attributed to their
    winner; ``prefix_seconds`` keeps only transactions in the first part of
    each minute; ``block_minutes=k`` sums k consecutive rounds regardless of
    winner (block id = round // k). Won rounds without transactions
    contribute 0 unless include_idle is False. Rounds without a winner never
    produce windows.
    """
    if prefix_seconds is not None and block_minutes is not None:
        raise ValueError("prefix_seconds and block_minutes are mutually exclusive")
    if prefix_seconds is not None and not 1 <= prefix_seconds <= 60:
        raise ValueError("prefix_seconds must be in [1, 60]")
    by_round = _round_map(rounds)
    recs = filter_positive(records) if filtered else list(records)
    for r in recs:
        if r.round_number not in by_round:
            raise UnknownRound(f"record {r.tx_id} references unknown round {r.round_number}")

    won = [
        r
        for r in rounds
        if isinstance(r.outcome, Won) and (winner is None or r.outcome.winner_id == winner)
    ]
    won.sort(key=lambda r: r.schedule.round_number)
    eligible = {r.schedule.round_number for r in won}

    sums: dict[int, float] = {}
    for rec in recs:
        if rec.round_number not in eligible:
            continue
        if prefix_seconds is not None:
            start = by_round[rec.round_number].schedule.minute_start
            if not start <= rec.timestamp < start + prefix_seconds * 1000:
                continue
        sums[rec.round_number] = sums.get(rec.round_number, 0.0) + rec.profit_usd

    if block_minutes is None:
        ids, starts, winners, totals = [], [], [], []
        for r in won:
            n = r.schedule.round_number
            if n not in sums and not include_idle:
                continue
            ids.append(n)
            starts.append(r.schedule.minute_start)
            winners.append(r.outcome.winner_id)
            totals.append(sums.get(n, 0.0))
        kind = "minute" if prefix_seconds is None else "prefix"
        return AggregateSeries(
            kind, tuple(ids), tuple(starts), tuple(winners), tuple(totals),
            filtered, 1, prefix_seconds,
        )

    if block_minutes < 1:
        raise ValueError("block_minutes must be >= 1")
    blocks: dict[int, float] = {}
    block_start: dict[int, TimePoint] = {}
    for r in won:
        n = r.schedule.round_number
        b = n // block_minutes
        if n in sums or include_idle:
            blocks[b] = blocks.get(b, 0.0) + sums.get(n, 0.0)
            prev = block_start.get(b)
            if prev is None or r.schedule.minute_start < prev:
                block_start[b] = r.schedule.minute_start
    ids = sorted(blocks)
    return AggregateSeries(
        "block",
        tuple(ids),
        tuple(block_start[b] for b in ids),
        tuple(None for _ in ids),
        tuple(blocks[b] for b in ids),
        filtered,
        block_minutes,
        None,
    )


@dataclass(frozen=True)
class PairedSeries:
    """Aligned (bid, markout) vectors feeding correlations and regressions."""

    window_ids: tuple[int, ...]
    bids: tuple[float, ...]
    markouts_usd: tuple[float, ...]
    bid_kind: str  # "highest" | "paid"
    shift: int
    bid_units: str  # "eth" | "usd"
    filtered: bool

    def __post_init__(self) -> None:
        if len(self.bids) != len(self.markouts_usd) or len(self.bids) != len(self.window_ids):
            raise ValueError("paired series fields must have equal length")

    def __len__(self) -> int:
        return len(self.bids)


def _round_bid(round_: AuctionRound, bid_kind: str) -> Decimal:
    assert isinstance(round_.outcome, Won)
    if bid_kind == "highest":
        return round_.outcome.highest_bid_eth
    if bid_kind == "paid":
        return round_.outcome.paid_eth
    raise ValueError(f"bid_kind must be 'highest' or 'paid', got {bid_kind!r}")


def pair_with_bids(
    aggregates: AggregateSeries,
    rounds: Sequence[AuctionRound],
    bid_kind: str = "paid",
    shift: int = 0,
    eth_usd: PriceSeries | None = None,
) -> PairedSeries:
    """Pair window markouts with (possibly shifted) bids.

    shift=0 pairs window w's markout with w's bid; shift=+1 with the *next*
    window's bid; shift=-1 with the previous one. Bids convert to USD at the
    round-start mid when an ETH/USD series is supplied, else stay in ETH.
    For block windows the bid is the sum of per-round bids across the block.
    """
    if shift not in (-1, 0, 1):
        raise ValueError("shift must be -1, 0, or +1")
    by_round = _round_map(rounds)

    def bid_of_round(n: int) -> float | None:
        r = by_round.get(n)
        if r is None or not isinstance(r.outcome, Won):
            return None
        eth = float(_round_bid(r, bid_kind))
        if eth_usd is None:
            return eth
        return eth * mid_at(eth_usd, r.schedule.minute_start)

    k = aggregates.block_minutes
    if aggregates.kind == "block":

        def bid_of_window(w: int) -> float | None:
            total, found = 0.0, False
            for n in range(w * k, (w + 1) * k):
                b = bid_of_round(n)
                if b is not None:
                    total, found = total + b, True
            return total if found else None

    else:
        bid_of_window = bid_of_round

    markout_by_id = dict(zip(aggregates.window_ids, aggregates.sums_usd))
    ids, xs, ys = [], [], []
    for w in aggregates.window_ids:
        b = bid_of_window(w + shift)
        if b is None:
            continue
        ids.append(w)
        xs.append(b)
        ys.append(markout_by_id[w])
    if not ids:
        raise SeriesTooShort("no aligned (bid, markout) pairs after shifting")
    return PairedSeries(
        tuple(ids), tuple(xs), tuple(ys), bid_kind, shift,
        "eth" if eth_usd is None else "usd", aggregates.filtered,
    )


class ColdStartShares(NamedTuple):
    tx_share: float
    markout_share_unfiltered: float
    markout_share_filtered: float
    uniform_benchmark: float


def cold_start_share(
    records: Sequence[MarkoutRecord],
    rounds: Sequence[AuctionRound],
    first_seconds: int = 5,
) -> ColdStartShares:
    """Shares of activity landing in the first seconds of won minutes.

    Under uniformly spread opportunities every share would be close to
    first_seconds/60 (8.33% for 5 seconds); depressed shares are the cold
    start signature.
    """
    if not 1 <= first_seconds <= 60:
        raise ValueError("first_seconds must be in [1, 60]")
    by_round = _round_map(rounds)
    cutoff_ms = first_seconds * 1000

    def in_head(rec: MarkoutRecord) -> bool:
        r = by_round.get(rec.round_number)
        if r is None:
            raise UnknownRound(f"record {rec.tx_id} references unknown round {rec.round_number}")
        return r.schedule.minute_start <= rec.timestamp < r.schedule.minute_start + cutoff_ms

    def share(rs: Sequence[MarkoutRecord], by_value: bool) -> float:
        if not rs:
            return float("nan")
        if by_value:
            total = sum(r.profit_usd for r in rs)
            head = sum(r.profit_usd for r in rs if in_head(r))
            return head / total if total != 0.0 else float("nan")
        return sum(1 for r in rs if in_head(r)) / len(rs)

    positive = filter_positive(records)
    return ColdStartShares(
        tx_share=share(records, by_value=False),
        markout_share_unfiltered=share(records, by_value=True),
        markout_share_filtered=share(positive, by_value=True),
        uniform_benchmark=first_seconds / 60.0,
    )


@dataclass(frozen=True)
class MarkoutSweep:
    rows: tuple[tuple[int, float, int, int], ...]  # (m_ms, total_filtered, n_records, n_dropped)
    best_m_ms: int


def markout_sweep(
    txs: Sequence[FastLaneTransaction],
    prices: PriceBook,
    m_values: Iterable[int] = DEFAULT_SWEEP_MS,
) -> MarkoutSweep:
    """Total filtered markout per candidate markout time; argmax reported."""
    rows = []
    for m in m_values:
        records, dropped = compute_markouts(txs, prices, m)
        total = sum(r.profit_usd for r in filter_positive(records))
        rows.append((m, total, len(records), dropped))
    if not rows:
        raise ValueError("m_values is empty")
    best = max(rows, key=lambda row: row[1])[0]
    return MarkoutSweep(tuple(rows), best)


def write_paired_csv(
    path,
    paired: PairedSeries,
    rounds: Sequence[AuctionRound],
    eth_usd: PriceSeries | None = None,
) -> None:
    """Export a paired series with the documented column set."""
    by_round = _round_map(rounds)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["window_id", "start_ts", "winner", "bid_eth", "bid_usd", "markout_usd", "filtered_flag"]
        )
        for wid, bid, mk in zip(paired.window_ids, paired.bids, paired.markouts_usd):
            r = by_round.get(wid)
            winner = r.winner_id if r is not None else ""
            start = r.schedule.minute_start if r is not None else ""
            if paired.bid_units == "eth":
                bid_eth, bid_usd = bid, ""
            else:
                bid_eth = float(_round_bid(r, paired.bid_kind)) if r is not None else ""
                bid_usd = bid
            w.writerow([wid, start, winner or "", bid_eth, bid_usd, mk, int(paired.filtered)])
