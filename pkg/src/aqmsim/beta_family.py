"""Beta-curve drop schemes: a static curve and two self-tuning variants.

All three share one drop law: nothing is dropped while the average
queue sits at or below ``q_min``, everything is dropped at or above
``q_max``, and in between the probability is ``p_max`` times a beta CDF
whose mean is pinned to the target queue length.  The curve's spread is
set as a fraction (``theta``) of the largest feasible standard
deviation, so a small theta concentrates the drop mass tightly around
the target.

``BetaRed`` keeps every parameter fixed.  ``ABetaRed`` re-scales
``p_max`` on a fixed interval to chase the target, while ``DBetaRed``
shifts a virtual target instead, recentering the whole curve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .aqm_base import AqmScheme, UpdateTimer, ewma_step, timer_due
from .special_functions import (
    BetaMoments,
    BetaShape,
    moments_to_shape,
    regularized_incomplete_beta,
    sigma_from_scale,
)

__all__ = [
    "BetaRedConfig",
    "BetaDropCurve",
    "AdaptiveState",
    "BetaRed",
    "ABetaRed",
    "DBetaRed",
    "betared_mu",
    "drop_curve",
    "curve_for_mean",
    "betared_drop_probability",
    "abetared_update",
    "dbetared_update",
    "target_queue_from_delay",
    "P_MAX_FLOOR",
    "P_MAX_CEIL",
    "DEFAULT_UPDATE_PERIOD",
    "ABETARED_INITIAL_P_MAX",
]

P_MAX_FLOOR = 0.01
P_MAX_CEIL = 0.99
DEFAULT_UPDATE_PERIOD = 0.5
ABETARED_INITIAL_P_MAX = 0.5


@dataclass(frozen=True)
class BetaRedConfig:
    """Tunables of the beta-curve drop law.

    ``q_target`` must lie strictly between the thresholds; ``theta``
    strictly inside (0, 1); ``p_max`` and ``weight`` inside (0, 1].
    """

    q_target: float
    q_min: float
    q_max: float
    p_max: float
    weight: float
    theta: float

    def __post_init__(self) -> None:
        if self.q_min < 0:
            raise ValueError(f"q_min must be nonnegative, got {self.q_min}")
        if not self.q_min < self.q_target < self.q_max:
            raise ValueError(
                "q_target must lie strictly between q_min and q_max, got "
                f"q_min={self.q_min}, q_target={self.q_target}, q_max={self.q_max}"
            )
        if not 0.0 < self.p_max <= 1.0:
            raise ValueError(f"p_max must lie in (0, 1], got {self.p_max}")
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"weight must lie in (0, 1], got {self.weight}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie strictly inside (0, 1), got {self.theta}")


@dataclass(frozen=True)
class BetaDropCurve:
    """Frozen drop-probability curve: thresholds plus a beta CDF between them."""

    mean: float
    std: float
    shape: BetaShape
    p_max: float
    q_min: float
    q_max: float

    def probability(self, q_avg: float) -> float:
        """Drop probability at the given average queue length."""
        if q_avg <= self.q_min:
            return 0.0
        if q_avg >= self.q_max:
            return 1.0
        z = (q_avg - self.q_min) / (self.q_max - self.q_min)
        return self.p_max * regularized_incomplete_beta(z, self.shape)


def curve_for_mean(
    mean: float, theta: float, p_max: float, q_min: float, q_max: float
) -> BetaDropCurve:
    """Build a drop curve with the CDF mean placed at the given fraction."""
    std = sigma_from_scale(theta, mean)
    shape = moments_to_shape(BetaMoments(mean, std))
    return BetaDropCurve(mean=mean, std=std, shape=shape, p_max=p_max, q_min=q_min, q_max=q_max)


def betared_mu(cfg: BetaRedConfig) -> float:
    """Curve mean pinning the drop mass center on the target queue length."""
    return (cfg.q_target - cfg.q_min) / (cfg.q_max - cfg.q_min)


def drop_curve(cfg: BetaRedConfig) -> BetaDropCurve:
    return curve_for_mean(betared_mu(cfg), cfg.theta, cfg.p_max, cfg.q_min, cfg.q_max)


def betared_drop_probability(cfg: BetaRedConfig, q_avg: float) -> float:
    """Static drop law evaluated directly from a config (uncached)."""
    return drop_curve(cfg).probability(q_avg)


def target_queue_from_delay(capacity_pkts: float, target_delay: float) -> float:
    """Packet-count target equivalent to a queueing-delay target.

    ``capacity_pkts`` is the bottleneck rate in packets per second; the
    result is left fractional on purpose.
    """
    if capacity_pkts <= 0:
        raise ValueError(f"capacity must be positive, got {capacity_pkts}")
    if target_delay < 0:
        raise ValueError(f"target delay must be nonnegative, got {target_delay}")
    return capacity_pkts * target_delay


@dataclass(frozen=True)
class AdaptiveState:
    """Knob of the self-tuning schemes plus their shared update timer.

    ``ABetaRed`` drives ``p_max_cur``; ``DBetaRed`` drives
    ``virtual_target``.  The gains scale the per-update step sizes and
    must lie in (0, 1].
    """

    timer: UpdateTimer
    alpha_gain: float = 1.0
    beta_gain: float = 1.0
    p_max_cur: float | None = None
    virtual_target: float | None = None

    def __post_init__(self) -> None:
        for name in ("alpha_gain", "beta_gain"):
            gain = getattr(self, name)
            if not 0.0 < gain <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {gain}")


def abetared_update(state: AdaptiveState, cfg: BetaRedConfig, q_avg: float) -> AdaptiveState:
    """One adaptation step for the p_max-driven scheme.

    Below target, p_max shrinks by a factor that weakens as the gap
    closes; above target, it grows by a logistic-style step scaled by
    the gap.  Both branches clamp to [0.01, 0.99]; at the target the
    state is unchanged.
    """
    p = state.p_max_cur
    span = cfg.q_max - cfg.q_min
    if q_avg < cfg.q_target:
        p = max(P_MAX_FLOOR, p * state.alpha_gain * (1.0 - (cfg.q_target - q_avg) / span))
    elif q_avg > cfg.q_target:
        p = min(P_MAX_CEIL, p + state.beta_gain * p * (1.0 - p) * (q_avg - cfg.q_target) / span)
    else:
        return state
    return replace(state, p_max_cur=p)


def dbetared_update(state: AdaptiveState, cfg: BetaRedConfig, q_avg: float) -> AdaptiveState:
    """One adaptation step for the virtual-target scheme.

    The step scales with mu*(1-mu) of the current virtual mean, so
    adjustment slows near the thresholds where the curve has little
    room left; the virtual target stays clamped one packet inside them.
    """
    span = cfg.q_max - cfg.q_min
    virtual = state.virtual_target
    mu = (virtual - cfg.q_min) / span
    delta = mu * (1.0 - mu) * (cfg.q_target - q_avg)
    if q_avg < cfg.q_target:
        virtual = min(cfg.q_max - 1.0, virtual + state.alpha_gain * delta)
    elif q_avg > cfg.q_target:
        virtual = max(cfg.q_min + 1.0, virtual + state.beta_gain * delta)
    else:
        return state
    return replace(state, virtual_target=virtual)


class BetaRed(AqmScheme):
    """Static beta-curve drop policy."""

    name = "betared"

    def __init__(self, cfg: BetaRedConfig) -> None:
        self.cfg = cfg
        self.curve = drop_curve(cfg)
        self._q_avg = 0.0

    @property
    def q_avg(self) -> float:
        return self._q_avg

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        self._q_avg = ewma_step(self._q_avg, self.cfg.weight, q_cur)
        return self.curve.probability(self._q_avg)


class ABetaRed(AqmScheme):
    """Beta curve with p_max adapted toward the target on a fixed interval.

    The config's ``p_max`` is the starting point (0.5 by default in the
    scheme factory); thresholds are conventionally 0 and the buffer size.
    """

    name = "abetared"

    def __init__(
        self,
        cfg: BetaRedConfig,
        alpha_gain: float = 1.0,
        beta_gain: float = 1.0,
        update_period: float = DEFAULT_UPDATE_PERIOD,
    ) -> None:
        self.cfg = cfg
        self._base = curve_for_mean(betared_mu(cfg), cfg.theta, 1.0, cfg.q_min, cfg.q_max)
        self.state = AdaptiveState(
            timer=UpdateTimer(update_period, update_period),
            alpha_gain=alpha_gain,
            beta_gain=beta_gain,
            p_max_cur=cfg.p_max,
        )
        self._q_avg = 0.0

    @property
    def q_avg(self) -> float:
        return self._q_avg

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        self._q_avg = ewma_step(self._q_avg, self.cfg.weight, q_cur)
        fired, timer = timer_due(now, self.state.timer)
        if fired:
            self.state = abetared_update(
                replace(self.state, timer=timer), self.cfg, self._q_avg
            )
        return self.state.p_max_cur * self._base.probability(self._q_avg)


class DBetaRed(AqmScheme):
    """Beta curve recentered on a virtual target chased toward the real one.

    On every update interval the virtual target moves against the
    current error, and the curve (mean and spread) is rebuilt from it;
    ``p_max`` conventionally stays at 1 so the curve reaches certainty
    continuously.
    """

    name = "dbetared"

    def __init__(
        self,
        cfg: BetaRedConfig,
        alpha_gain: float = 1.0,
        beta_gain: float = 1.0,
        update_period: float = DEFAULT_UPDATE_PERIOD,
    ) -> None:
        if not cfg.q_min + 1.0 <= cfg.q_target <= cfg.q_max - 1.0:
            raise ValueError(
                "q_target must start at least one packet inside the thresholds, got "
                f"q_target={cfg.q_target} for [{cfg.q_min}, {cfg.q_max}]"
            )
        self.cfg = cfg
        self.state = AdaptiveState(
            timer=UpdateTimer(update_period, update_period),
            alpha_gain=alpha_gain,
            beta_gain=beta_gain,
            virtual_target=cfg.q_target,
        )
        self._q_avg = 0.0
        self._rebuild_curve()

    def _rebuild_curve(self) -> None:
        cfg = self.cfg
        mu = (self.state.virtual_target - cfg.q_min) / (cfg.q_max - cfg.q_min)
        self.curve = curve_for_mean(mu, cfg.theta, 1.0, cfg.q_min, cfg.q_max)

    @property
    def q_avg(self) -> float:
        return self._q_avg

    @property
    def virtual_target(self) -> float:
        return self.state.virtual_target

    def enqueue_probability(self, now: float, q_cur: int) -> float:
        self._q_avg = ewma_step(self._q_avg, self.cfg.weight, q_cur)
        fired, timer = timer_due(now, self.state.timer)
        if fired:
            old = self.state.virtual_target
            self.state = dbetared_update(
                replace(self.state, timer=timer), self.cfg, self._q_avg
            )
            if self.state.virtual_target != old:
                self._rebuild_curve()
        return self.cfg.p_max * self.curve.probability(self._q_avg)
