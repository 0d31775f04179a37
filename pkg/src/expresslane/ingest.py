"""Versioned CSV schemas for rounds, fast-lane transactions, and price ticks.

All files are UTF-8, comma-separated, '.' decimal point, integer-ms UTC
timestamps, and may carry a leading "#v1" schema tag (writers always emit
it). Strict mode raises on the first bad row; lenient mode skips bad rows
and reports them with line numbers, which is the sane default for real
chain extracts.

    rounds: round,start_ts_ms,end_ts_ms,winner,highest_bid_eth,paid_bid_eth
    txs:    tx_id,ts_ms,round,winner,token_in,token_out,amount_in,amount_out,gas_fee_usd
    ticks:  ts_ms,symbol,mid_price
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .core import (
    NO_WINNER,
    AuctionRound,
    FastLaneTransaction,
    RoundSchedule,
    Won,
)
from .prices import PriceSeries

SCHEMA_TAG = "#v1"
ROUNDS_HEADER = ["round", "start_ts_ms", "end_ts_ms", "winner", "highest_bid_eth", "paid_bid_eth"]
TXS_HEADER = [
    "tx_id", "ts_ms", "round", "winner", "token_in", "token_out",
    "amount_in", "amount_out", "gas_fee_usd",
]
TICKS_HEADER = ["ts_ms", "symbol", "mid_price"]

ROUNDS_FILE = "rounds.csv"
TXS_FILE = "txs.csv"
TICKS_FILE = "ticks.csv"


class IngestError(ValueError):
    pass


class MalformedHeader(IngestError):
    pass


class RowError(IngestError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvariantViolation(RowError):
    pass


class NonMonotoneTimestamps(RowError):
    pass


class NonPositivePrice(RowError):
    pass


@dataclass
class Dataset:
    """Everything the analytics path consumes, simulated or ingested."""

    rounds: list[AuctionRound]
    txs: list[FastLaneTransaction]
    ticks: dict[str, PriceSeries]
    provenance: str = ""

    def validate(self) -> None:
        known = {r.schedule.round_number for r in self.rounds}
        for tx in self.txs:
            if tx.round_number not in known:
                raise IngestError(f"tx {tx.tx_id} references unknown round {tx.round_number}")

    def __eq__(self, other) -> bool:
        # provenance is a note, not data; field-for-field identity ignores it
        return (
            isinstance(other, Dataset)
            and self.rounds == other.rounds
            and self.txs == other.txs
            and self.ticks == other.ticks
        )


def _open_rows(source):
    if isinstance(source, (str, Path)):
        fh = open(source, newline="", encoding="utf-8")
        close = True
    else:
        fh, close = source, False
    return fh, close


def _read_header(reader, expected: list[str]):
    """Consume the optional schema tag and the mandatory header row."""
    line_no = 0
    for row in reader:
        line_no += 1
        if row and row[0].startswith("#"):
            if row[0].strip() != SCHEMA_TAG:
                raise MalformedHeader(f"unsupported schema tag {row[0]!r} (expected {SCHEMA_TAG})")
            continue
        if [c.strip() for c in row] != expected:
            raise MalformedHeader(f"header {row!r} does not match {expected!r}")
        return line_no
    raise MalformedHeader("file is empty (no header row)")


def _report(strict: bool, diagnostics: list | None, err: RowError):
    if strict:
        raise err
    if diagnostics is not None:
        diagnostics.append(str(err))


def parse_rounds(source, strict: bool = True, diagnostics: list | None = None) -> list[AuctionRound]:
    """Parse the auction-round schema into settled AuctionRounds."""
    fh, close = _open_rows(source)
    try:
        reader = csv.reader(fh)
        line_no = _read_header(reader, ROUNDS_HEADER)
        rounds: list[AuctionRound] = []
        for row in reader:
            line_no += 1
            if not row:
                continue
            try:
                rounds.append(_parse_round_row(row, line_no))
            except RowError as err:
                _report(strict, diagnostics, err)
        rounds.sort(key=lambda r: r.schedule.round_number)
        return rounds
    finally:
        if close:
            fh.close()


def _parse_round_row(row: list[str], line_no: int) -> AuctionRound:
    if len(row) != len(ROUNDS_HEADER):
        raise RowError(line_no, f"expected {len(ROUNDS_HEADER)} fields, got {len(row)}")
    try:
        number = int(row[0])
        start, end = int(row[1]), int(row[2])
    except ValueError as exc:
        raise RowError(line_no, f"bad integer field: {exc}") from exc
    winner = row[3].strip()
    try:
        schedule = RoundSchedule(
            round_number=number,
            minute_start=start,
            minute_end=end,
            bidding_open=start - 60_000,
            bidding_close=start - 15_000,
        )
    except ValueError as exc:
        raise RowError(line_no, str(exc)) from exc
    if not winner:
        if row[4].strip() or row[5].strip():
            raise InvariantViolation(line_no, "bid columns must be empty for a no-winner round")
        return AuctionRound(schedule, outcome=NO_WINNER)
    try:
        highest, paid = Decimal(row[4]), Decimal(row[5])
    except InvalidOperation as exc:
        raise RowError(line_no, f"bad decimal field: {exc}") from exc
    if highest <= 0 or paid <= 0:
        raise InvariantViolation(line_no, "bids must be positive")
    if paid > highest:
        raise InvariantViolation(line_no, f"paid {paid} exceeds highest {highest}")
    return AuctionRound(schedule, outcome=Won(winner, highest, paid))


def parse_txs(
    source,
    rounds: list[AuctionRound] | None = None,
    strict: bool = True,
    diagnostics: list | None = None,
) -> list[FastLaneTransaction]:
    """Parse the fast-lane transaction schema.

    When ``rounds`` is given, each transaction's timestamp is cross-checked
    against its round's minute; violations reject the row in strict mode
    and keep it with a diagnostic in lenient mode.
    """
    by_round = {r.schedule.round_number: r for r in rounds} if rounds is not None else None
    fh, close = _open_rows(source)
    try:
        reader = csv.reader(fh)
        line_no = _read_header(reader, TXS_HEADER)
        txs: list[FastLaneTransaction] = []
        for row in reader:
            line_no += 1
            if not row:
                continue
            try:
                tx = _parse_tx_row(row, line_no)
            except RowError as err:
                _report(strict, diagnostics, err)
                continue
            if by_round is not None:
                r = by_round.get(tx.round_number)
                if r is None:
                    _report(strict, diagnostics, RowError(line_no, f"unknown round {tx.round_number}"))
                    continue
                if not r.schedule.contains(tx.timestamp):
                    err = InvariantViolation(
                        line_no,
                        f"tx {tx.tx_id} at {tx.timestamp} outside round {tx.round_number} minute",
                    )
                    if strict:
                        raise err
                    if diagnostics is not None:
                        diagnostics.append(str(err))
                    # lenient: keep the row, real extracts carry clock skew
            txs.append(tx)
        txs.sort(key=lambda t: (t.round_number, t.timestamp, t.tx_id))
        return txs
    finally:
        if close:
            fh.close()


def _parse_tx_row(row: list[str], line_no: int) -> FastLaneTransaction:
    if len(row) != len(TXS_HEADER):
        raise RowError(line_no, f"expected {len(TXS_HEADER)} fields, got {len(row)}")
    try:
        return FastLaneTransaction(
            tx_id=row[0].strip(),
            timestamp=int(row[1]),
            round_number=int(row[2]),
            winner_id=row[3].strip(),
            token_in=row[4].strip(),
            token_out=row[5].strip(),
            amount_in=float(row[6]),
            amount_out=float(row[7]),
            gas_fee_usd=float(row[8]),
        )
    except ValueError as exc:
        raise RowError(line_no, str(exc)) from exc


def parse_ticks(
    source,
    strict: bool = True,
    diagnostics: list | None = None,
    tick_interval_ms: int = 1000,
) -> dict[str, PriceSeries]:
    """Parse interleaved per-symbol ticks into sorted PriceSeries.

    Rows must be time-ordered within each symbol; a duplicated (ts, symbol)
    or a backward step raises NonMonotoneTimestamps naming the line.
    """
    fh, close = _open_rows(source)
    try:
        reader = csv.reader(fh)
        line_no = _read_header(reader, TICKS_HEADER)
        acc: dict[str, tuple[list[int], list[float]]] = {}
        for row in reader:
            line_no += 1
            if not row:
                continue
            if len(row) != len(TICKS_HEADER):
                _report(strict, diagnostics, RowError(line_no, f"expected 3 fields, got {len(row)}"))
                continue
            try:
                ts, symbol, price = int(row[0]), row[1].strip(), float(row[2])
            except ValueError as exc:
                _report(strict, diagnostics, RowError(line_no, str(exc)))
                continue
            if price <= 0:
                _report(strict, diagnostics, NonPositivePrice(line_no, f"{symbol}: price {price} <= 0"))
                continue
            ts_list, px_list = acc.setdefault(symbol, ([], []))
            if ts_list and ts <= ts_list[-1]:
                msg = (
                    f"{symbol}: duplicate timestamp {ts}"
                    if ts == ts_list[-1]
                    else f"{symbol}: timestamp {ts} before previous {ts_list[-1]}"
                )
                _report(strict, diagnostics, NonMonotoneTimestamps(line_no, msg))
                continue
            ts_list.append(ts)
            px_list.append(price)
        return {
            sym: PriceSeries(sym, ts_list, px_list, tick_interval_ms)
            for sym, (ts_list, px_list) in acc.items()
        }
    finally:
        if close:
            fh.close()


# --- writers ----------------------------------------------------------------


def _writer(path):
    if isinstance(path, (str, Path)):
        return open(path, "w", newline="", encoding="utf-8"), True
    return path, False


def write_rounds(path, rounds: list[AuctionRound]) -> None:
    fh, close = _writer(path)
    try:
        w = csv.writer(fh)
        fh.write(SCHEMA_TAG + "\n")
        w.writerow(ROUNDS_HEADER)
        for r in sorted(rounds, key=lambda r: r.schedule.round_number):
            s = r.schedule
            if isinstance(r.outcome, Won):
                w.writerow([
                    s.round_number, s.minute_start, s.minute_end,
                    r.outcome.winner_id, str(r.outcome.highest_bid_eth), str(r.outcome.paid_eth),
                ])
            else:
                w.writerow([s.round_number, s.minute_start, s.minute_end, "", "", ""])
    finally:
        if close:
            fh.close()


def write_txs(path, txs: list[FastLaneTransaction]) -> None:
    fh, close = _writer(path)
    try:
        w = csv.writer(fh)
        fh.write(SCHEMA_TAG + "\n")
        w.writerow(TXS_HEADER)
        for t in sorted(txs, key=lambda t: (t.round_number, t.timestamp, t.tx_id)):
            w.writerow([
                t.tx_id, t.timestamp, t.round_number, t.winner_id,
                t.token_in, t.token_out,
                repr(t.amount_in), repr(t.amount_out), repr(t.gas_fee_usd),
            ])
    finally:
        if close:
            fh.close()


def write_ticks(path, ticks: dict[str, PriceSeries]) -> None:
    fh, close = _writer(path)
    try:
        w = csv.writer(fh)
        fh.write(SCHEMA_TAG + "\n")
        w.writerow(TICKS_HEADER)
        for symbol in sorted(ticks):
            series = ticks[symbol]
            for ts, px in zip(series.timestamps, series.prices):
                w.writerow([int(ts), symbol, repr(float(px))])
    finally:
        if close:
            fh.close()


def write_dataset(out_dir, dataset: Dataset) -> None:
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    write_rounds(out / ROUNDS_FILE, dataset.rounds)
    write_txs(out / TXS_FILE, dataset.txs)
    write_ticks(out / TICKS_FILE, dataset.ticks)


def load_dataset(data_dir, strict: bool = False, provenance: str = "") -> Dataset:
    """Load rounds/txs/ticks from a directory of the three schema files."""
    data = Path(data_dir)
    diagnostics: list[str] = []
    rounds = parse_rounds(data / ROUNDS_FILE, strict=strict, diagnostics=diagnostics)
    txs = parse_txs(data / TXS_FILE, rounds=rounds, strict=strict, diagnostics=diagnostics)
    ticks = parse_ticks(data / TICKS_FILE, strict=strict, diagnostics=diagnostics)
    ds = Dataset(rounds, txs, ticks, provenance or f"loaded from {data}")
    ds.validate()
    if diagnostics:
        ds.provenance += f" ({len(diagnostics)} rows with diagnostics)"
    return ds


def schema_text() -> str:
    """Human-readable description of the three file schemas."""
    return __doc__
