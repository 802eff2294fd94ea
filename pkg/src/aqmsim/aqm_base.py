"""Shared queue-management plumbing: bounded FIFO, EWMA, drop decisions.

Every scheme in this package is driven through the same two hooks: an
enqueue-time drop probability and an optional dequeue-time drop check
(only sojourn-time schemes use the latter).  The router owns the random
draw and the queue append, so scheme logic stays pure and replayable.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum

__all__ = [
    "PacketRecord",
    "QueueState",
    "DropDecision",
    "EwmaState",
    "UpdateTimer",
    "AqmScheme",
    "admit",
    "ewma_step",
    "ewma_update",
    "timer_due",
]


@dataclass(slots=True)
class PacketRecord:
    """One packet in flight; enqueue_time is stamped at buffer admission."""

    flow_id: int
    seq: int
    size_bytes: int
    send_time: float = 0.0
    enqueue_time: float = 0.0

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise ValueError(f"packet size must be positive, got {self.size_bytes}")


class QueueState:
    """Bounded FIFO of packets awaiting bottleneck service."""

    __slots__ = ("capacity", "packets")

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"queue capacity must be at least 1, got {capacity}")
        self.capacity = int(capacity)
        self.packets: deque[PacketRecord] = deque()

    @property
    def occupancy(self) -> int:
        return len(self.packets)

    def __len__(self) -> int:
        return len(self.packets)

    def head(self) -> PacketRecord:
        return self.packets[0]

    def pop(self) -> PacketRecord:
        return self.packets.popleft()


class DropDecision(Enum):
    ACCEPT = "accept"
    PROBABILISTIC_DROP = "probabilistic_drop"
    FORCED_DROP = "forced_drop"


def admit(queue: QueueState, packet: PacketRecord, p: float, u: float) -> DropDecision:
    """Admission decision for one arriving packet.

    A full buffer forces a drop regardless of ``p``; otherwise the packet
    is dropped iff the caller's uniform draw ``u`` falls below ``p``, and
    appended to the queue when accepted.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"drop probability must lie in [0, 1], got {p}")
    if queue.occupancy >= queue.capacity:
        return DropDecision.FORCED_DROP
    if u < p:
        return DropDecision.PROBABILISTIC_DROP
    queue.packets.append(packet)
    return DropDecision.ACCEPT


@dataclass(frozen=True, slots=True)
class EwmaState:
    """Exponentially weighted moving average of the queue length."""

    q_avg: float
    weight: float

    def __post_init__(self) -> None:
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"EWMA weight must lie in (0, 1], got {self.weight}")
        if self.q_avg < 0.0:
            raise ValueError(f"q_avg must be nonnegative, got {self.q_avg}")


def ewma_step(q_avg: float, weight: float, q_cur: float) -> float:
    """One averaging step: (1 - weight) * q_avg + weight * q_cur."""
    return (1.0 - weight) * q_avg + weight * q_cur


def ewma_update(state: EwmaState, q_cur: float) -> EwmaState:
    if q_cur < 0:
        raise ValueError(f"queue length must be nonnegative, got {q_cur}")
    return EwmaState(ewma_step(state.q_avg, state.weight, q_cur), state.weight)


@dataclass(frozen=True, slots=True)
class UpdateTimer:
    """Fixed-period timer; the deadline advances by whole periods."""

    period: float
    next_fire: float

    def __post_init__(self) -> None:
        if not self.period > 0.0:
            raise ValueError(f"timer period must be positive, got {self.period}")


def timer_due(t: float, timer: UpdateTimer) -> tuple[bool, UpdateTimer]:
    """Check (and advance) the timer at time ``t``.

    Fires iff ``t`` has reached the deadline; the new deadline is the
    first whole multiple of the period beyond ``t``, so an idle gap
    yields one firing rather than a burst.
    """
    if t < timer.next_fire:
        return False, timer
    steps = math.floor((t - timer.next_fire) / timer.period) + 1.0
    return True, replace(timer, next_fire=timer.next_fire + steps * timer.period)


class AqmScheme:
    """Drop-policy contract the bottleneck router drives.

    ``enqueue_probability`` is called once per arriving packet with the
    pre-admission queue length and returns the drop probability for that
    packet; internal averages and timers update as a side effect.
    ``dequeue_drop`` is consulted when a packet is pulled for service;
    only sojourn-time schemes override it.
    """

    name = "base"

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        return 0.0

    def dequeue_drop(self, now: float, sojourn: float, occupancy: int) -> bool:
        return False

    @property
    def q_avg(self) -> float | None:
        """Current averaged queue length, when the scheme keeps one."""
        return None
