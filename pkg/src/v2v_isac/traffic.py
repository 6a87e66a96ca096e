"""Transmit buffer as a FIFO ledger of per-packet ages.

Ages are counted in whole slots. Propagation (~0.17 us over the link) and
transmission delays are far below one slot and contribute nothing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class TrafficParams:
    lambda_slot: float = 9.0
    q_max: int = 200
    packet_bytes: int = 4000


@dataclass(frozen=True)
class SlotTrafficReport:
    served: int
    delivered_ages: tuple[int, ...]
    dropped: int
    arrivals: int  # admitted, i.e. offered minus dropped
    q_end: int
    aou_avg: float


def sample_arrivals(lambda_slot: float, rng: np.random.Generator) -> int:
    """Poisson number of packets arriving during one slot."""
    if lambda_slot < 0:
        raise ValueError(f"arrival rate must be non-negative, got {lambda_slot}")
    return int(rng.poisson(lambda_slot))


class PacketLedger:
    """FIFO buffer holding the arrival slot of every queued packet.

    Storing arrival stamps instead of ages makes the per-slot age increment
    free: the age of a packet is ``clock - stamp``. The head of the deque is
    the oldest packet.
    """

    def __init__(self, q_max: int = 200, packet_bytes: int = 4000, ages: Iterable[int] = ()):
        if q_max < 1:
            raise ValueError("q_max must be >= 1")
        ages = [int(a) for a in ages]
        if len(ages) > q_max:
            raise ValueError(f"{len(ages)} packets exceed capacity {q_max}")
        if any(a < 0 for a in ages) or any(x < y for x, y in zip(ages, ages[1:])):
            raise ValueError("ages must be non-negative and non-increasing from head to tail")
        self.q_max = int(q_max)
        self.packet_bytes = int(packet_bytes)
        self.clock = 0
        self._stamps: deque[int] = deque(-a for a in ages)
        self._stamp_sum = sum(self._stamps)

    def __len__(self) -> int:
        return len(self._stamps)

    @property
    def ages(self) -> list[int]:
        return [self.clock - s for s in self._stamps]

    def total_age(self) -> int:
        return len(self._stamps) * self.clock - self._stamp_sum

    def clear(self) -> None:
        self._stamps.clear()
        self._stamp_sum = 0
        self.clock = 0

    def advance(self, arrivals_offered: int, service_capacity: int) -> SlotTrafficReport:
        """Run one slot: serve, age, admit.

        The oldest ``min(q, capacity)`` packets leave with their current ages,
        everything still queued ages by one slot, then the new arrivals join
        at age 0. Arrivals beyond ``q_max`` are tail-dropped.
        """
        if arrivals_offered < 0 or service_capacity < 0:
            raise ValueError("arrivals and service capacity must be non-negative")
        n_serve = min(len(self._stamps), int(service_capacity))
        delivered = []
        for _ in range(n_serve):
            stamp = self._stamps.popleft()
            self._stamp_sum -= stamp
            delivered.append(self.clock - stamp)

        self.clock += 1
        admitted = min(int(arrivals_offered), self.q_max - len(self._stamps))
        self._stamps.extend([self.clock] * admitted)
        self._stamp_sum += self.clock * admitted

        return SlotTrafficReport(
            served=n_serve,
            delivered_ages=tuple(delivered),
            dropped=int(arrivals_offered) - admitted,
            arrivals=admitted,
            q_end=len(self._stamps),
            aou_avg=average_aou(self),
        )


def advance_slot(ledger: PacketLedger, arrivals_offered: int, service_capacity_packets: int) -> SlotTrafficReport:
    return ledger.advance(arrivals_offered, service_capacity_packets)


def average_aou(ledger: PacketLedger) -> float:
    # the q + 1 denominator is intentional (keeps the empty buffer at 0)
    return ledger.total_age() / (len(ledger) + 1)
