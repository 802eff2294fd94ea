"""Performance metrics computed from a run trace.

All functions are pure: the same trace always yields the same numbers.
Queue statistics treat the sampled series as sample-and-hold (each
sample holds until the next one), which is exact for the simulator's
uniform sampling cadence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricsReport",
    "METRIC_COLUMNS",
    "average_queue_length",
    "drop_rate",
    "throughput",
    "end_to_end_latency",
    "jitter",
    "moving_average_queue",
    "compute_report",
]

METRIC_COLUMNS = ("aql", "equilibrium_aql", "drop_rate", "throughput_bps", "latency_s", "jitter_s")


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """One run's summary: queue statistics plus the end-user metrics."""

    aql: float
    equilibrium_aql: float
    drop_rate: float
    throughput_bps: float
    latency_s: float
    jitter_s: float
    moving_avg_times: np.ndarray
    moving_avg_values: np.ndarray

    def csv_values(self) -> tuple[float, ...]:
        """Scalar fields in METRIC_COLUMNS order."""
        return (
            self.aql,
            self.equilibrium_aql,
            self.drop_rate,
            self.throughput_bps,
            self.latency_s,
            self.jitter_s,
        )


def _sample_arrays(trace) -> tuple[np.ndarray, np.ndarray]:
    t = np.frombuffer(trace.sample_time, dtype=np.float64)
    q = np.frombuffer(trace.sample_q_cur, dtype=np.float64)
    if t.size == 0:
        raise ValueError("trace contains no queue samples")
    return t, q


def _delivery_arrays(trace) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    flows = np.frombuffer(trace.dl_flow, dtype=np.int64)
    send = np.frombuffer(trace.dl_send, dtype=np.float64)
    deliver = np.frombuffer(trace.dl_deliver, dtype=np.float64)
    return flows, send, deliver


def _cum_integral(t: np.ndarray, q: np.ndarray) -> np.ndarray:
    # Cumulative sample-and-hold integral evaluated at each sample instant.
    out = np.empty_like(t)
    out[0] = 0.0
    if t.size > 1:
        np.cumsum(q[:-1] * np.diff(t), out=out[1:])
    return out


def _integral_at(t: np.ndarray, q: np.ndarray, cum: np.ndarray, x: float) -> float:
    # Integral from t[0] to x; the last sample's value holds beyond it.
    idx = int(np.searchsorted(t, x, side="right")) - 1
    if idx < 0:
        return 0.0
    return float(cum[idx] + q[idx] * (x - t[idx]))


def average_queue_length(trace, window: tuple[float, float]) -> float:
    """Time-weighted mean queue length over the window ``(t0, t1)``."""
    t0, t1 = window
    if not t1 > t0:
        raise ValueError(f"averaging window must have positive width, got [{t0}, {t1}]")
    t, q = _sample_arrays(trace)
    if t0 < t[0] - 1e-12 or t1 > trace.duration + 1e-9:
        raise ValueError(
            f"window [{t0}, {t1}] outside the sampled span [{t[0]}, {trace.duration}]"
        )
    cum = _cum_integral(t, q)
    return (_integral_at(t, q, cum, t1) - _integral_at(t, q, cum, t0)) / (t1 - t0)


def drop_rate(trace) -> float:
    """All Router 1 drops over all Router 1 arrivals."""
    if trace.arrivals == 0:
        raise ValueError("trace has no arrivals at the bottleneck router")
    return trace.dropped_total / trace.arrivals


def throughput(trace) -> float:
    """Mean over sinks of bits received over the first-to-last delivery span.

    Sinks with fewer than two deliveries (or a zero span) are excluded;
    having none left is an error.
    """
    flows, _, deliver = _delivery_arrays(trace)
    if flows.size == 0:
        raise ValueError("trace contains no deliveries")
    order = np.argsort(flows, kind="stable")
    fs = flows[order]
    dv = deliver[order]
    starts = np.flatnonzero(np.r_[True, fs[1:] != fs[:-1]])
    ends = np.r_[starts[1:], fs.size] - 1
    counts = ends - starts + 1
    span = dv[ends] - dv[starts]
    ok = (counts >= 2) & (span > 0)
    if not ok.any():
        raise ValueError("no sink received two deliveries over a positive span")
    bits = counts[ok] * float(trace.packet_size) * 8.0
    return float(np.mean(bits / span[ok]))


def end_to_end_latency(trace) -> float:
    """Mean source-to-sink delay over every delivered packet."""
    _, send, deliver = _delivery_arrays(trace)
    if send.size == 0:
        raise ValueError("trace contains no deliveries")
    return float(np.mean(deliver - send))


def jitter(trace) -> float:
    """Mean absolute delay difference between consecutive deliveries,
    pooled across flows."""
    flows, send, deliver = _delivery_arrays(trace)
    if flows.size == 0:
        raise ValueError("trace contains no deliveries")
    order = np.argsort(flows, kind="stable")
    fs = flows[order]
    delays = (deliver - send)[order]
    same_flow = fs[1:] == fs[:-1]
    if not same_flow.any():
        raise ValueError("no flow received two deliveries")
    return float(np.abs(np.diff(delays))[same_flow].mean())


def moving_average_queue(trace, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Trailing time-weighted mean queue length at each sample instant.

    Before one full window has elapsed the mean covers the available
    span, so the series starts at the first sample's value.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    t, q = _sample_arrays(trace)
    cum = _cum_integral(t, q)
    lo = np.maximum(t - window, t[0])
    cum_lo = np.interp(lo, t, cum)
    span = t - lo
    values = np.where(span > 0, (cum - cum_lo) / np.where(span > 0, span, 1.0), q)
    return t.copy(), values


def compute_report(trace, ma_window: float = 25.0) -> MetricsReport:
    """All metrics for one run.

    The equilibrium statistic is the time-weighted mean over the second
    half of the run, treating the first half as the transient.
    """
    t, _ = _sample_arrays(trace)
    t_end = trace.duration
    half = t_end / 2.0
    ma_t, ma_v = moving_average_queue(trace, ma_window)
    return MetricsReport(
        aql=average_queue_length(trace, (t[0], t_end)),
        equilibrium_aql=average_queue_length(trace, (half, t_end)),
        drop_rate=drop_rate(trace),
        throughput_bps=throughput(trace),
        latency_s=end_to_end_latency(trace),
        jitter_s=jitter(trace),
        moving_avg_times=ma_t,
        moving_avg_values=ma_v,
    )
