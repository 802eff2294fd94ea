"""Comparison drop policies: Drop Tail, RED, ARED, CoDel, and PIE.

These follow the published control laws — Floyd's adaptive-RED AIMD
rule, the RFC 8289 CoDel law, the RFC 8033 PI controller — stripped to
their cores: no byte mode, no gentle-RED, no burst allowance or
derandomization, and CoDel's drop-count hysteresis on re-entry is
omitted.  All of them signal by dropping; none marks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .aqm_base import AqmScheme, UpdateTimer, ewma_step, timer_due

__all__ = [
    "DropTail",
    "RedConfig",
    "Red",
    "Ared",
    "CodelState",
    "Codel",
    "PieState",
    "Pie",
    "red_drop_probability",
    "ared_update",
    "codel_on_dequeue",
    "pie_update",
    "ARED_P_MIN",
    "ARED_P_MAX",
]

ARED_P_MIN = 0.01
ARED_P_MAX = 0.5


class DropTail(AqmScheme):
    """No early dropping; the full buffer is the only congestion signal."""

    name = "droptail"


@dataclass(frozen=True)
class RedConfig:
    """Classic two-threshold linear drop law parameters."""

    q_min: float
    q_max: float
    p_max: float
    weight: float

    def __post_init__(self) -> None:
        if self.q_min < 0:
            raise ValueError(f"q_min must be nonnegative, got {self.q_min}")
        if not self.q_min < self.q_max:
            raise ValueError(f"q_min must be below q_max, got {self.q_min} >= {self.q_max}")
        if not 0.0 < self.p_max <= 1.0:
            raise ValueError(f"p_max must lie in (0, 1], got {self.p_max}")
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"weight must lie in (0, 1], got {self.weight}")


def red_drop_probability(cfg: RedConfig, q_avg: float) -> float:
    """Piecewise-linear drop law between the two thresholds."""
    if q_avg <= cfg.q_min:
        return 0.0
    if q_avg >= cfg.q_max:
        return 1.0
    return cfg.p_max * (q_avg - cfg.q_min) / (cfg.q_max - cfg.q_min)


class Red(AqmScheme):
    """Random early detection with a fixed linear law."""

    name = "red"

    def __init__(self, cfg: RedConfig) -> None:
        self.cfg = cfg
        self._q_avg = 0.0

    @property
    def q_avg(self) -> float:
        return self._q_avg

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        self._q_avg = ewma_step(self._q_avg, self.cfg.weight, q_cur)
        return red_drop_probability(self.cfg, self._q_avg)


def ared_update(p_max: float, q_avg: float, target_band: tuple[float, float]) -> float:
    """Floyd's AIMD rule for the RED p_max knob.

    Additive increase (at most 0.01 per step) above the band,
    multiplicative decrease (x 0.9) below it, always clamped to
    [0.01, 0.5].
    """
    lo, hi = target_band
    if q_avg > hi:
        p_max = p_max + min(0.01, p_max / 4.0)
    elif q_avg < lo:
        p_max = p_max * 0.9
    return min(ARED_P_MAX, max(ARED_P_MIN, p_max))


class Ared(AqmScheme):
    """RED with p_max adapted toward a band around the target queue.

    Thresholds derive from the target the standard way: the lower one at
    half the target, the upper at three times the lower, which centers
    the 40-60% adaptation band on the target itself.
    """

    name = "ared"

    def __init__(
        self,
        q_target: float,
        weight: float,
        p_max: float = 0.1,
        update_period: float = 0.5,
    ) -> None:
        if q_target <= 0:
            raise ValueError(f"q_target must be positive, got {q_target}")
        self.q_min = q_target / 2.0
        self.q_max = 3.0 * self.q_min
        span = self.q_max - self.q_min
        self.band = (self.q_min + 0.4 * span, self.q_min + 0.6 * span)
        self.p_max = p_max
        self._cfg = RedConfig(self.q_min, self.q_max, self.p_max, weight)
        self.timer = UpdateTimer(update_period, update_period)
        self._q_avg = 0.0

    @property
    def q_avg(self) -> float:
        return self._q_avg

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        self._q_avg = ewma_step(self._q_avg, self._cfg.weight, q_cur)
        fired, self.timer = timer_due(now, self.timer)
        if fired:
            p = ared_update(self.p_max, self._q_avg, self.band)
            if p != self.p_max:
                self.p_max = p
                self._cfg = replace(self._cfg, p_max=p)
        return red_drop_probability(self._cfg, self._q_avg)


@dataclass(frozen=True)
class CodelState:
    """Control state of the sojourn-time dropper."""

    target: float
    interval: float
    drop_count: int = 0
    dropping: bool = False
    next_drop_time: float = math.inf
    first_above_time: float | None = None

    def __post_init__(self) -> None:
        if self.target <= 0:
            raise ValueError(f"target must be positive, got {self.target}")
        if self.interval <= 0:
            raise ValueError(f"interval must be positive, got {self.interval}")
        if self.drop_count < 0:
            raise ValueError(f"drop_count must be nonnegative, got {self.drop_count}")


def codel_on_dequeue(
    state: CodelState, sojourn: float, now: float, occupancy: int
) -> tuple[bool, CodelState]:
    """One dequeue-time control step; returns (drop_this_packet, new_state).

    Dropping begins once the sojourn time has stayed at or above target
    for a full interval, recurs at gaps shrunk by 1/sqrt(drop_count),
    and ends as soon as the sojourn dips under target.  A queue holding
    at most one packet is never dropped from.
    """
    if sojourn < 0:
        raise ValueError(f"sojourn must be nonnegative, got {sojourn}")
    if sojourn < state.target or occupancy <= 1:
        if state.dropping or state.first_above_time is not None:
            return False, replace(state, dropping=False, first_above_time=None)
        return False, state
    if state.first_above_time is None:
        return False, replace(state, first_above_time=now)
    if state.dropping:
        if now >= state.next_drop_time:
            count = state.drop_count + 1
            return True, replace(
                state,
                drop_count=count,
                next_drop_time=state.next_drop_time + state.interval / math.sqrt(count),
            )
        return False, state
    if now - state.first_above_time >= state.interval:
        return True, replace(
            state, dropping=True, drop_count=1, next_drop_time=now + state.interval
        )
    return False, state


class Codel(AqmScheme):
    """Sojourn-time dropper; acts at dequeue, nothing early at enqueue."""

    name = "codel"

    def __init__(self, target: float = 0.005, interval: float = 0.100) -> None:
        self.state = CodelState(target=target, interval=interval)

    def dequeue_drop(self, now: float, sojourn: float, occupancy: int) -> bool:
        drop, self.state = codel_on_dequeue(self.state, sojourn, now, occupancy)
        return drop


@dataclass(frozen=True)
class PieState:
    """PI controller state; gains are per second."""

    drop_prob: float = 0.0
    qdelay_old: float = 0.0
    alpha_gain: float = 0.125
    beta_gain: float = 1.25

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError(f"drop_prob must lie in [0, 1], got {self.drop_prob}")


def pie_update(state: PieState, qdelay: float, target: float) -> PieState:
    """One PI step: proportional on the delay error, plus its trend."""
    p = (
        state.drop_prob
        + state.alpha_gain * (qdelay - target)
        + state.beta_gain * (qdelay - state.qdelay_old)
    )
    p = min(1.0, max(0.0, p))
    return replace(state, drop_prob=p, qdelay_old=qdelay)


class Pie(AqmScheme):
    """Delay-target PI dropper.

    Queue delay is estimated as backlog over the configured departure
    rate (the bottleneck is fixed-rate here, so no rate estimator is
    needed).
    """

    name = "pie"

    def __init__(
        self,
        target: float,
        capacity_pkts: float,
        update_period: float = 0.015,
        alpha_gain: float = 0.125,
        beta_gain: float = 1.25,
    ) -> None:
        if target <= 0:
            raise ValueError(f"target must be positive, got {target}")
        if capacity_pkts <= 0:
            raise ValueError(f"capacity_pkts must be positive, got {capacity_pkts}")
        self.target = target
        self.capacity_pkts = capacity_pkts
        self.state = PieState(alpha_gain=alpha_gain, beta_gain=beta_gain)
        self.timer = UpdateTimer(update_period, update_period)

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        fired, self.timer = timer_due(now, self.timer)
        if fired:
            self.state = pie_update(self.state, q_cur / self.capacity_pkts, self.target)
        return self.state.drop_prob
