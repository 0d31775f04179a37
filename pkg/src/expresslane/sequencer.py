"""Dual-queue sequencer: an express lane merged with a delayed normal lane.

Express transactions execute at their arrival time; normal transactions are
held for ``delay_ms`` (200ms deployed value). Both lanes are FCFS and the
merged execution order sorts by (effective_time, arrival, seq_id), so a tie
in effective time goes to the earlier arrival.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable

from .core import TimePoint, round_of

DEFAULT_DELAY_MS = 200


class NotWinner(PermissionError):
    """Express submission by someone who does not hold the round's lane."""


class Lane(enum.Enum):
    EXPRESS = "express"
    NORMAL = "normal"


@dataclass(frozen=True)
class SequencedTx:
    payload: Any
    lane: Lane
    arrival: TimePoint
    effective_time: TimePoint
    seq_id: int


class DualLaneSequencer:
    """Merges the express (0ms) and normal (delayed) FCFS queues.

    ``winner_lookup(round_number) -> bidder_id or None`` gates express
    submissions when provided; without it express eligibility is not
    checked (useful for isolated queue tests). Ordering is a pure function
    of the submission history.
    """

    def __init__(
        self,
        delay_ms: int = DEFAULT_DELAY_MS,
        genesis: TimePoint = 0,
        winner_lookup: Callable[[int], str | None] | None = None,
    ):
        if delay_ms < 0:
            raise ValueError("delay_ms must be non-negative")
        self.delay_ms = delay_ms
        self.genesis = genesis
        self.winner_lookup = winner_lookup
        self._pending: list[SequencedTx] = []
        self._next_seq = 0

    def enqueue(
        self,
        payload: Any,
        lane: Lane,
        arrival: TimePoint,
        submitter: str | None = None,
    ) -> SequencedTx:
        """Accept a transaction; express eligibility is evaluated at arrival time."""
        if lane is Lane.EXPRESS and self.winner_lookup is not None:
            holder = self.winner_lookup(round_of(arrival, self.genesis))
            if holder is None or submitter != holder:
                raise NotWinner(
                    f"express submission by {submitter!r} at {arrival}; lane held by {holder!r}"
                )
        effective = arrival if lane is Lane.EXPRESS else arrival + self.delay_ms
        tx = SequencedTx(payload, lane, arrival, effective, self._next_seq)
        self._next_seq += 1
        self._pending.append(tx)
        return tx

    def drain(self, until: TimePoint) -> list[SequencedTx]:
        """Emit all pending transactions effective at or before `until`, in order.

        Each transaction is emitted exactly once across successive drains.
        """
        due = [tx for tx in self._pending if tx.effective_time <= until]
        due.sort(key=lambda tx: (tx.effective_time, tx.arrival, tx.seq_id))
        self._pending = [tx for tx in self._pending if tx.effective_time > until]
        return due

    def pending_count(self) -> int:
        return len(self._pending)
