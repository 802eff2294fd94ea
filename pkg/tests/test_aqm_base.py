import random

import pytest

from aqmsim.aqm_base import (
    DropDecision,
    EwmaState,
    PacketRecord,
    QueueState,
    UpdateTimer,
    admit,
    ewma_update,
    timer_due,
)


def pkt(seq=0, flow=0):
    return PacketRecord(flow_id=flow, seq=seq, size_bytes=1000)


class TestEwma:
    def test_arithmetic(self):
        out = ewma_update(EwmaState(100.0, 0.1), 200.0)
        assert out.q_avg == pytest.approx(110.0, abs=1e-12)
        assert out.weight == 0.1

    def test_fixed_point(self):
        out = ewma_update(EwmaState(77.5, 0.3), 77.5)
        assert out.q_avg == pytest.approx(77.5, abs=1e-12)

    def test_weight_one_tracks_current(self):
        out = ewma_update(EwmaState(100.0, 1.0), 42.0)
        assert out.q_avg == 42.0

    def test_convex_combination(self):
        rng = random.Random(5)
        state = EwmaState(rng.uniform(0, 500), rng.uniform(0.01, 1.0))
        for _ in range(2000):
            q_cur = rng.uniform(0, 1000)
            lo, hi = min(state.q_avg, q_cur), max(state.q_avg, q_cur)
            state = ewma_update(state, q_cur)
            assert lo - 1e-9 <= state.q_avg <= hi + 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            EwmaState(10.0, 0.0)
        with pytest.raises(ValueError):
            EwmaState(10.0, 1.5)
        with pytest.raises(ValueError):
            EwmaState(-1.0, 0.5)
        with pytest.raises(ValueError):
            ewma_update(EwmaState(10.0, 0.5), -3)


class TestUpdateTimer:
    def test_not_due_before_deadline(self):
        fired, timer = timer_due(0.4, UpdateTimer(0.5, 0.5))
        assert not fired
        assert timer == UpdateTimer(0.5, 0.5)

    def test_fires_at_deadline(self):
        fired, timer = timer_due(0.5, UpdateTimer(0.5, 0.5))
        assert fired
        assert timer.next_fire == pytest.approx(1.0)

    def test_catch_up_after_idle_gap(self):
        # a long gap yields one firing and a deadline beyond now
        fired, timer = timer_due(1.7, UpdateTimer(0.5, 0.5))
        assert fired
        assert timer.next_fire == pytest.approx(2.0)

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError):
            UpdateTimer(0.0, 1.0)


class TestAdmit:
    def test_forced_drop_when_full(self):
        q = QueueState(2)
        assert admit(q, pkt(0), 0.0, 0.9) is DropDecision.ACCEPT
        assert admit(q, pkt(1), 0.0, 0.9) is DropDecision.ACCEPT
        for p in (0.0, 0.5, 1.0):
            assert admit(q, pkt(2), p, 0.0) is DropDecision.FORCED_DROP
        assert q.occupancy == 2

    def test_zero_probability_accepts(self):
        q = QueueState(5)
        assert admit(q, pkt(), 0.0, 0.0) is DropDecision.ACCEPT
        assert q.occupancy == 1

    def test_draw_below_probability_drops(self):
        q = QueueState(5)
        assert admit(q, pkt(), 0.3, 0.25) is DropDecision.PROBABILISTIC_DROP
        assert q.occupancy == 0

    def test_draw_at_probability_accepts(self):
        # strict comparison: u < p drops, u == p does not
        q = QueueState(5)
        assert admit(q, pkt(), 0.3, 0.3) is DropDecision.ACCEPT

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            admit(QueueState(5), pkt(), 1.5, 0.0)

    def test_occupancy_never_exceeds_capacity(self):
        rng = random.Random(9)
        q = QueueState(8)
        for step in range(5000):
            if rng.random() < 0.6:
                admit(q, pkt(step), rng.random(), rng.random())
            elif q.occupancy:
                q.pop()
            assert 0 <= q.occupancy <= q.capacity
            assert q.occupancy == len(q.packets)

    def test_verdicts_deterministic_for_seeded_draws(self):
        def run(seed):
            rng = random.Random(seed)
            q = QueueState(4)
            out = []
            for step in range(500):
                out.append(admit(q, pkt(step), 0.4, rng.random()))
                if q.occupancy and step % 3 == 0:
                    q.pop()
            return out

        assert run(123) == run(123)
        assert run(123) != run(321)
