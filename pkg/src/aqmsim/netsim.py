"""Deterministic packet-level simulation of a dumbbell network.

N sources feed Router 1 through private edge links; Router 1's egress
is the bottleneck where the scheme under test manages a bounded FIFO;
Router 2 fans deliveries out to per-flow sinks.  ACKs return on an
uncongested reverse path and are never queued.

The transport model is an ACK-clocked congestion window (slow start
plus cubic growth, multiplicative decrease on loss), not a full TCP
stack: packets carry no payload, losses are detected from sequence
holes in the per-flow delivery stream, and dropped data is simply
regenerated by the greedy source.  A flow whose entire tail window was
dropped would otherwise stall forever, so an idle-window fallback
collapses it back to slow start after a few round trips of silence.
This is the model's largest fidelity gap versus a real stack; it was
chosen to keep runs deterministic and fast at desk scale.

Determinism: one seeded PRNG owned by the run supplies every random
draw, and events are processed in (time, schedule-order) order, so an
identical (config, seed) pair yields a bit-identical trace.
"""

from __future__ import annotations

import math
import random
from array import array
from dataclasses import dataclass
from heapq import heappop, heappush

from .aqm_base import AqmScheme, DropDecision, PacketRecord, QueueState, admit

__all__ = [
    "TopologyConfig",
    "FlowState",
    "Trace",
    "Simulation",
    "build_dumbbell",
    "scenario1_plan",
    "scenario2_flows",
    "scenario2_plan",
    "tcp_on_ack",
    "tcp_on_loss",
    "SLOW_START",
    "CONG_AVOID",
    "RECOVERY",
    "CUBIC_C",
    "CUBIC_BETA",
    "INITIAL_CWND",
]

# Congestion-window model constants.
CUBIC_C = 0.4              # cubic growth coefficient, packets/s^3
CUBIC_BETA = 0.3           # multiplicative decrease factor
# Standard TCP-friendly region: the window never grows slower than a
# Reno-style additive increase of this many packets per RTT.
FRIENDLY_GAIN = 3.0 * CUBIC_BETA / (2.0 - CUBIC_BETA)
INITIAL_CWND = 10.0
RTT_GAIN = 0.125           # EWMA gain for the RTT estimate
MIN_RECOVERY_TIMEOUT = 1.0  # floor for the idle-window fallback, seconds
RECOVERY_RTT_MULTIPLE = 3.0
WATCHDOG_PERIOD = 0.05     # idle-window scan cadence, seconds
SAMPLE_PERIOD = 0.01       # queue sampling cadence, seconds

SLOW_START, CONG_AVOID, RECOVERY = range(3)

# Event kinds: packet at Router 1, bottleneck service completion, ACK
# back at the source, flow activation edges, periodic queue sampling,
# and the idle-flow watchdog.  Events are heap tuples
# (time, schedule_counter, kind, payload); the counter breaks ties.
EV_ARRIVAL, EV_SERVICE_DONE, EV_ACK, EV_FLOW_START, EV_FLOW_STOP, EV_SAMPLE, EV_WATCHDOG = range(7)


@dataclass(frozen=True)
class TopologyConfig:
    """Dumbbell parameters.

    Defaults: 100 Mbps / 1 ms edges, 50 Mbps / 10 ms bottleneck, a
    1000-packet buffer and 1000-byte packets.  ``start_spread`` staggers
    flow starts uniformly over that many seconds (seeded); setting
    ``edge_jitter`` adds a fixed per-flow propagation offset drawn once
    from +-jitter.  ``dupack_threshold`` is how many deliveries past a
    sequence hole it takes before the hole counts as a loss signal
    (3 mirrors fast retransmit; 1 reacts to the first reveal).
    """

    n_flows: int
    bottleneck_rate: float = 50e6    # bits/second
    bottleneck_delay: float = 0.010  # seconds, one way
    edge_rate: float = 100e6
    edge_delay: float = 0.001
    buffer_packets: int = 1000
    packet_size: int = 1000          # bytes
    start_spread: float = 0.1
    edge_jitter: float = 0.0
    dupack_threshold: int = 3

    def __post_init__(self) -> None:
        if self.n_flows < 1:
            raise ValueError(f"n_flows must be at least 1, got {self.n_flows}")
        for name in ("bottleneck_rate", "bottleneck_delay", "edge_rate", "edge_delay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.buffer_packets < 1:
            raise ValueError(f"buffer_packets must be at least 1, got {self.buffer_packets}")
        if self.packet_size < 1:
            raise ValueError(f"packet_size must be at least 1, got {self.packet_size}")
        if self.start_spread < 0:
            raise ValueError(f"start_spread must be nonnegative, got {self.start_spread}")
        if not 0 <= self.edge_jitter < self.edge_delay:
            raise ValueError(
                f"edge_jitter must lie in [0, edge_delay), got {self.edge_jitter}"
            )
        if self.dupack_threshold < 1:
            raise ValueError(
                f"dupack_threshold must be at least 1, got {self.dupack_threshold}"
            )

    @property
    def capacity_pkts(self) -> float:
        """Bottleneck capacity in packets per second."""
        return self.bottleneck_rate / (8.0 * self.packet_size)

    @property
    def edge_tx_time(self) -> float:
        return 8.0 * self.packet_size / self.edge_rate

    @property
    def bottleneck_tx_time(self) -> float:
        return 8.0 * self.packet_size / self.bottleneck_rate

    @property
    def one_way_floor(self) -> float:
        """Minimum source-to-sink latency: every transmission plus propagation."""
        return (
            2.0 * (self.edge_tx_time + self.edge_delay)
            + self.bottleneck_tx_time
            + self.bottleneck_delay
        )

    @property
    def ack_path_delay(self) -> float:
        """Sink-to-source return delay (uncongested; ACK transmission ignored)."""
        return 2.0 * self.edge_delay + self.bottleneck_delay

    @property
    def base_rtt(self) -> float:
        return self.one_way_floor + self.ack_path_delay


@dataclass(slots=True)
class FlowState:
    """Per-flow congestion window and delivery bookkeeping."""

    flow_id: int
    start: float
    stop: float = math.inf
    active: bool = False
    state: int = SLOW_START
    cwnd: float = INITIAL_CWND
    ssthresh: float = math.inf
    rtt_estimate: float = 0.025
    next_seq: int = 0
    accounted: int = 0      # packets with seq below this are delivered or written off
    recover: int = -1       # highest seq sent at the last reduction (once-per-RTT guard)
    pending_hole: int = -1  # first hole awaiting the reveal threshold, -1 when none
    reveal_count: int = 0   # deliveries observed since the pending hole appeared
    wmax: float = INITIAL_CWND
    epoch: float = 0.0
    epoch_cwnd: float = INITIAL_CWND
    cubic_k: float = 0.0
    edge_free: float = 0.0       # source NIC serialization horizon
    sink_edge_free: float = 0.0  # sink-side edge serialization horizon
    jitter: float = 0.0          # fixed per-flow extra propagation
    last_progress: float = 0.0

    @property
    def inflight(self) -> int:
        return self.next_seq - self.accounted


def _enter_congestion_avoidance(flow: FlowState, now: float) -> None:
    # Concave approach to wmax when below it, convex probe past it otherwise.
    if flow.cwnd < flow.wmax:
        flow.cubic_k = ((flow.wmax - flow.cwnd) / CUBIC_C) ** (1.0 / 3.0)
    else:
        flow.wmax = flow.cwnd
        flow.cubic_k = 0.0
    flow.epoch = now
    flow.epoch_cwnd = flow.cwnd
    flow.state = CONG_AVOID


def tcp_on_ack(flow: FlowState, now: float, max_cwnd: float = math.inf) -> None:
    """Window growth for one newly acknowledged packet.

    Slow start adds one packet per ACK until the threshold; congestion
    avoidance follows the cubic curve anchored at the last loss epoch
    (the window equals ``wmax`` exactly ``cubic_k`` seconds after the
    epoch), with the standard additive-increase floor so small windows
    keep Reno-like pressure.  In recovery the window holds still.
    """
    if flow.state == SLOW_START:
        flow.cwnd += 1.0
        if flow.cwnd >= flow.ssthresh:
            _enter_congestion_avoidance(flow, now)
    elif flow.state == CONG_AVOID:
        t = now - flow.epoch
        target = flow.wmax + CUBIC_C * (t - flow.cubic_k) ** 3
        friendly = flow.epoch_cwnd + FRIENDLY_GAIN * t / flow.rtt_estimate
        if friendly > target:
            target = friendly
        if target > flow.cwnd:
            flow.cwnd = target if target < max_cwnd else max_cwnd


def tcp_on_loss(flow: FlowState, now: float) -> None:
    """Multiplicative decrease; callers enforce once per round trip."""
    flow.wmax = flow.cwnd
    flow.cwnd = max(1.0, flow.cwnd * (1.0 - CUBIC_BETA))
    flow.ssthresh = max(2.0, flow.cwnd)
    flow.state = RECOVERY
    flow.epoch = now
    flow.epoch_cwnd = flow.cwnd
    flow.cubic_k = ((flow.wmax - flow.cwnd) / CUBIC_C) ** (1.0 / 3.0)


class Trace:
    """Everything recorded during one run.

    Queue samples land every 10 ms; every delivery is logged with its
    send and delivery time.  Counter identity on a correct run:
    ``sent == delivered + dropped_total + in_flight_end``.
    """

    def __init__(self, topology: TopologyConfig):
        self.sample_time = array("d")
        self.sample_q_cur = array("d")
        self.sample_q_avg = array("d")
        self.sample_drops = array("d")
        self.sample_arrivals = array("d")
        self.dl_flow = array("q")
        self.dl_seq = array("q")
        self.dl_send = array("d")
        self.dl_deliver = array("d")
        self.sent = 0
        self.arrivals = 0
        self.prob_drops = 0
        self.forced_drops = 0
        self.dequeue_drops = 0
        self.delivered = 0
        self.in_flight_end = 0
        self.duration = 0.0
        self.seed: int | None = None
        self.packet_size = topology.packet_size
        self.bottleneck_rate = topology.bottleneck_rate
        self.capacity_pkts = topology.capacity_pkts
        self.one_way_floor = topology.one_way_floor

    @property
    def dropped_total(self) -> int:
        """All drops at Router 1: probabilistic, dequeue-time, and forced."""
        return self.prob_drops + self.forced_drops + self.dequeue_drops

    def conservation_balance(self) -> tuple[int, int]:
        """(sent, delivered + dropped + in flight) — equal on a correct run."""
        return self.sent, self.delivered + self.dropped_total + self.in_flight_end

    def write_queue_csv(self, path) -> None:
        """``time,q_cur,q_avg,drops_cum,arrivals_cum`` at the sample cadence."""
        with open(path, "w", newline="") as fh:
            fh.write("time,q_cur,q_avg,drops_cum,arrivals_cum\n")
            for row in zip(
                self.sample_time,
                self.sample_q_cur,
                self.sample_q_avg,
                self.sample_drops,
                self.sample_arrivals,
            ):
                fh.write("%.10g,%.10g,%.10g,%d,%d\n" % (row[0], row[1], row[2], row[3], row[4]))

    def write_deliveries_csv(self, path) -> None:
        """``flow,seq,send_time,deliver_time`` — one row per delivered packet."""
        with open(path, "w", newline="") as fh:
            fh.write("flow,seq,send_time,deliver_time\n")
            for row in zip(self.dl_flow, self.dl_seq, self.dl_send, self.dl_deliver):
                fh.write("%d,%d,%.10g,%.10g\n" % row)


def scenario1_plan(n_flows: int) -> list[tuple[int, float, float]]:
    """Constant load: every flow active for the whole run."""
    if n_flows < 1:
        raise ValueError(f"n_flows must be at least 1, got {n_flows}")
    return [(i, 0.0, math.inf) for i in range(n_flows)]


def scenario2_flows(t: float, n_max: int, base: int = 100, interval: float = 50.0) -> int:
    """Active-flow count of the five-step varying-load schedule.

    The steps are base / 2*base / n_max / 2*base / base over five equal
    intervals; the peak must dominate, so ``n_max >= 2*base``.
    """
    if base < 1:
        raise ValueError(f"base must be at least 1, got {base}")
    if n_max < 2 * base:
        raise ValueError(f"n_max must be at least {2 * base}, got {n_max}")
    if interval <= 0:
        raise ValueError(f"interval must be positive, got {interval}")
    if not 0 <= t <= 5 * interval:
        raise ValueError(f"t must lie within the schedule span [0, {5 * interval}], got {t}")
    counts = (base, 2 * base, n_max, 2 * base, base)
    return counts[min(4, int(t // interval))]


def scenario2_plan(
    n_max: int, base: int = 100, interval: float = 50.0
) -> list[tuple[int, float, float]]:
    """Per-flow active intervals realizing the five-step schedule.

    Flow ids below ``base`` stay on the whole run, ids below ``2*base``
    cover the middle three intervals, and the rest only the peak one.
    """
    scenario2_flows(0.0, n_max, base, interval)  # validate the triple
    plan: list[tuple[int, float, float]] = []
    for fid in range(n_max):
        if fid < base:
            plan.append((fid, 0.0, math.inf))
        elif fid < 2 * base:
            plan.append((fid, interval, 4.0 * interval))
        else:
            plan.append((fid, 2.0 * interval, 3.0 * interval))
    return plan


class Simulation:
    """One configured dumbbell run: topology + scheme + flow plan."""

    def __init__(
        self,
        topology: TopologyConfig,
        scheme: AqmScheme,
        plan: list[tuple[int, float, float]],
    ) -> None:
        seen: set[int] = set()
        for fid, start, stop in plan:
            if not 0 <= fid < topology.n_flows:
                raise ValueError(
                    f"flow id {fid} outside [0, n_flows={topology.n_flows})"
                )
            if fid in seen:
                raise ValueError(f"duplicate flow id {fid} in plan")
            if start < 0 or stop <= start:
                raise ValueError(
                    f"flow {fid} needs 0 <= start < stop, got [{start}, {stop}]"
                )
            seen.add(fid)
        self.topology = topology
        self.scheme = scheme
        self.plan = list(plan)

    def run(self, duration: float, seed: int = 1) -> Trace:
        """Process events in (time, schedule-order) until the clock passes
        ``duration``; returns the completed trace."""
        if duration <= 0:
            raise ValueError(f"duration must be positive, got {duration}")
        topo = self.topology
        scheme = self.scheme
        rng = random.Random(seed)
        rng_random = rng.random
        trace = Trace(topo)
        trace.duration = float(duration)
        trace.seed = seed

        queue = QueueState(topo.buffer_packets)
        q_packets = queue.packets
        flows: dict[int, FlowState] = {}

        tx_edge = topo.edge_tx_time
        tx_bn = topo.bottleneck_tx_time
        edge_delay = topo.edge_delay
        bn_delay = topo.bottleneck_delay
        ack_delay = topo.ack_path_delay
        size = topo.packet_size
        base_rtt = topo.base_rtt
        max_cwnd = topo.buffer_packets + 2.0 * topo.capacity_pkts * base_rtt
        dup_threshold = topo.dupack_threshold
        capacity = topo.buffer_packets

        heap: list = []
        counter = 0

        def push(t: float, kind: int, payload) -> None:
            nonlocal counter
            heappush(heap, (t, counter, kind, payload))
            counter += 1

        sent = arrivals = prob_drops = forced_drops = dequeue_drops = delivered = 0
        in_pipeline = 0
        busy = False

        accept = DropDecision.ACCEPT
        forced = DropDecision.FORCED_DROP

        dl_flow = trace.dl_flow
        dl_seq = trace.dl_seq
        dl_send = trace.dl_send
        dl_deliver = trace.dl_deliver

        def pump(f: FlowState, now: float) -> None:
            nonlocal sent, in_pipeline
            limit = int(f.cwnd)
            while f.active and f.next_seq - f.accounted < limit:
                seq = f.next_seq
                f.next_seq = seq + 1
                begin = f.edge_free if f.edge_free > now else now
                f.edge_free = begin + tx_edge
                pkt = PacketRecord(f.flow_id, seq, size, send_time=now)
                sent += 1
                in_pipeline += 1
                push(f.edge_free + edge_delay + f.jitter, EV_ARRIVAL, pkt)

        def start_service(now: float) -> None:
            nonlocal busy, dequeue_drops, in_pipeline
            while q_packets:
                pkt = q_packets[0]
                if scheme.dequeue_drop(now, now - pkt.enqueue_time, len(q_packets)):
                    q_packets.popleft()
                    dequeue_drops += 1
                    in_pipeline -= 1
                    continue
                q_packets.popleft()
                busy = True
                push(now + tx_bn, EV_SERVICE_DONE, pkt)
                return
            busy = False

        def write_off(f: FlowState, now: float) -> None:
            # Idle-window fallback: everything outstanding is declared lost so
            # the flow can resume; the window collapses RTO-style.
            f.accounted = f.next_seq
            f.pending_hole = -1
            f.reveal_count = 0
            if f.next_seq - 1 > f.recover:
                f.recover = f.next_seq - 1
                f.wmax = f.cwnd
                f.ssthresh = max(2.0, f.cwnd * (1.0 - CUBIC_BETA))
                f.cwnd = 1.0
                f.state = SLOW_START
            f.last_progress = now
            pump(f, now)

        def handle_arrival(now: float, pkt: PacketRecord) -> None:
            nonlocal arrivals, prob_drops, forced_drops, in_pipeline
            arrivals += 1
            p = scheme.enqueue_probability(now, len(q_packets))
            pkt.enqueue_time = now
            decision = admit(queue, pkt, p, rng_random())
            if decision is accept:
                if not busy:
                    start_service(now)
            elif decision is forced:
                forced_drops += 1
                in_pipeline -= 1
            else:
                prob_drops += 1
                in_pipeline -= 1

        def handle_service_done(now: float, pkt: PacketRecord) -> None:
            nonlocal delivered, in_pipeline
            f = flows[pkt.flow_id]
            at_router2 = now + bn_delay
            begin = f.sink_edge_free if f.sink_edge_free > at_router2 else at_router2
            f.sink_edge_free = begin + tx_edge
            deliver_time = f.sink_edge_free + edge_delay + f.jitter
            delivered += 1
            in_pipeline -= 1
            dl_flow.append(pkt.flow_id)
            dl_seq.append(pkt.seq)
            dl_send.append(pkt.send_time)
            dl_deliver.append(deliver_time)
            push(deliver_time + ack_delay, EV_ACK, (pkt.flow_id, pkt.seq, pkt.send_time))
            start_service(now)

        def handle_ack(now: float, payload) -> None:
            fid, seq, send_time = payload
            f = flows[fid]
            f.last_progress = now
            if seq < f.accounted:
                return  # already written off by the idle fallback
            holes = seq - f.accounted
            f.accounted = seq + 1
            f.rtt_estimate += RTT_GAIN * ((now - send_time) - f.rtt_estimate)
            if holes and f.pending_hole < 0 and seq - 1 > f.recover:
                first_missing = seq - holes
                f.pending_hole = first_missing if first_missing > f.recover else f.recover + 1
                f.reveal_count = 0
            loss_signal = False
            if f.pending_hole >= 0:
                f.reveal_count += 1
                if f.reveal_count >= dup_threshold:
                    loss_signal = True
                    f.pending_hole = -1
                    f.reveal_count = 0
            if loss_signal:
                tcp_on_loss(f, now)
                f.recover = f.next_seq - 1
            else:
                if f.state == RECOVERY and f.accounted > f.recover:
                    f.state = CONG_AVOID
                tcp_on_ack(f, now, max_cwnd)
            if f.active:
                pump(f, now)

        def handle_sample(now: float, k: int) -> None:
            scheme_avg = scheme.q_avg
            trace.sample_time.append(now)
            trace.sample_q_cur.append(float(len(q_packets)))
            trace.sample_q_avg.append(
                scheme_avg if scheme_avg is not None else float(len(q_packets))
            )
            trace.sample_drops.append(float(prob_drops + forced_drops + dequeue_drops))
            trace.sample_arrivals.append(float(arrivals))
            push((k + 1) * SAMPLE_PERIOD, EV_SAMPLE, k + 1)

        def handle_watchdog(now: float) -> None:
            for f in flows.values():
                if f.active and f.next_seq > f.accounted:
                    rto = RECOVERY_RTT_MULTIPLE * f.rtt_estimate
                    if rto < MIN_RECOVERY_TIMEOUT:
                        rto = MIN_RECOVERY_TIMEOUT
                    if now - f.last_progress > rto:
                        write_off(f, now)
            push(now + WATCHDOG_PERIOD, EV_WATCHDOG, None)

        for fid, start, stop in self.plan:
            offset = rng_random() * topo.start_spread
            jit = (rng_random() - 0.5) * 2.0 * topo.edge_jitter if topo.edge_jitter else 0.0
            push(start + offset, EV_FLOW_START, (fid, stop, jit))
            if stop < duration:
                push(stop, EV_FLOW_STOP, fid)
        if self.plan:
            push(0.0, EV_SAMPLE, 0)
            push(WATCHDOG_PERIOD, EV_WATCHDOG, None)

        while heap:
            t, _, kind, payload = heappop(heap)
            if t > duration:
                break
            if kind == EV_ARRIVAL:
                handle_arrival(t, payload)
            elif kind == EV_SERVICE_DONE:
                handle_service_done(t, payload)
            elif kind == EV_ACK:
                handle_ack(t, payload)
            elif kind == EV_SAMPLE:
                handle_sample(t, payload)
            elif kind == EV_WATCHDOG:
                handle_watchdog(t)
            elif kind == EV_FLOW_START:
                fid, stop, jit = payload
                f = FlowState(flow_id=fid, start=t, stop=stop, active=True)
                f.rtt_estimate = base_rtt + 2.0 * jit
                f.jitter = jit
                f.last_progress = t
                flows[fid] = f
                pump(f, t)
            else:  # EV_FLOW_STOP
                f = flows.get(payload)
                if f is not None:
                    f.active = False

        trace.sent = sent
        trace.arrivals = arrivals
        trace.prob_drops = prob_drops
        trace.forced_drops = forced_drops
        trace.dequeue_drops = dequeue_drops
        trace.delivered = delivered
        trace.in_flight_end = in_pipeline
        return trace


def build_dumbbell(
    topology: TopologyConfig,
    scheme: AqmScheme,
    plan: list[tuple[int, float, float]] | None = None,
) -> Simulation:
    """Wire up a simulation; defaults to all flows active from t=0."""
    if plan is None:
        plan = scenario1_plan(topology.n_flows)
    return Simulation(topology, scheme, plan)
