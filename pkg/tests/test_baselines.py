import math
import random

import pytest

from aqmsim.aqm_base import DropDecision, PacketRecord, QueueState, admit
from aqmsim.baselines import (
    Ared,
    Codel,
    CodelState,
    DropTail,
    Pie,
    PieState,
    Red,
    RedConfig,
    ared_update,
    codel_on_dequeue,
    pie_update,
    red_drop_probability,
)


class TestRed:
    def test_linear_law(self):
        cfg = RedConfig(q_min=0, q_max=1000, p_max=0.1, weight=0.002)
        assert red_drop_probability(cfg, 300.0) == pytest.approx(0.03, abs=1e-12)

    def test_below_and_above_thresholds(self):
        cfg = RedConfig(q_min=100, q_max=500, p_max=0.2, weight=0.002)
        assert red_drop_probability(cfg, 50.0) == 0.0
        assert red_drop_probability(cfg, 100.0) == 0.0
        assert red_drop_probability(cfg, 500.0) == 1.0
        assert red_drop_probability(cfg, 900.0) == 1.0

    def test_continuous_and_piecewise_linear(self):
        cfg = RedConfig(q_min=100, q_max=500, p_max=0.2, weight=0.002)
        just_above = red_drop_probability(cfg, 100.0 + 1e-9)
        assert just_above == pytest.approx(0.0, abs=1e-12)
        mid = red_drop_probability(cfg, 300.0)
        assert mid == pytest.approx(0.1, abs=1e-12)

    def test_scheme_uses_ewma(self):
        scheme = Red(RedConfig(q_min=0, q_max=100, p_max=1.0, weight=1.0))
        p = scheme.enqueue_probability(0.0, 50)
        assert p == pytest.approx(0.5)
        assert scheme.q_avg == 50.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RedConfig(q_min=500, q_max=100, p_max=0.1, weight=0.002)


class TestAred:
    def test_additive_increase_above_band(self):
        assert ared_update(0.1, 300.0, (225.0, 275.0)) == pytest.approx(0.11, abs=1e-12)

    def test_multiplicative_decrease_below_band(self):
        assert ared_update(0.1, 100.0, (225.0, 275.0)) == pytest.approx(0.09, abs=1e-12)

    def test_unchanged_inside_band(self):
        assert ared_update(0.1, 250.0, (225.0, 275.0)) == 0.1

    def test_increase_step_caps_at_one_percent(self):
        # p/4 = 0.1 exceeds the 0.01 cap
        assert ared_update(0.4, 300.0, (225.0, 275.0)) == pytest.approx(0.41, abs=1e-12)

    def test_clamps_under_random_updates(self):
        rng = random.Random(31)
        p = 0.1
        for _ in range(10000):
            p = ared_update(p, rng.uniform(0, 1000), (225.0, 275.0))
            assert 0.01 <= p <= 0.5

    def test_band_centered_on_target(self):
        scheme = Ared(q_target=250.0, weight=0.002)
        assert scheme.q_min == 125.0
        assert scheme.q_max == 375.0
        assert scheme.band == (225.0, 275.0)


class TestCodel:
    def test_never_drops_below_target(self):
        st = CodelState(target=0.005, interval=0.1)
        now = 0.0
        for _ in range(1000):
            drop, st = codel_on_dequeue(st, 0.004, now, occupancy=10)
            assert not drop
            now += 0.001

    def test_never_drops_with_single_packet_queue(self):
        st = CodelState(target=0.005, interval=0.1)
        now = 0.0
        for _ in range(1000):
            drop, st = codel_on_dequeue(st, 0.5, now, occupancy=1)
            assert not drop
            now += 0.001

    def test_enters_dropping_after_full_interval_above_target(self):
        st = CodelState(target=0.005, interval=0.1)
        drop, st = codel_on_dequeue(st, 0.01, 1.0, occupancy=10)
        assert not drop and st.first_above_time == 1.0
        drop, st = codel_on_dequeue(st, 0.01, 1.05, occupancy=10)
        assert not drop
        drop, st = codel_on_dequeue(st, 0.01, 1.1, occupancy=10)
        assert drop
        assert st.dropping and st.drop_count == 1

    def test_drop_spacing_shrinks_by_inverse_sqrt(self):
        st = CodelState(
            target=0.005, interval=0.1, dropping=True, drop_count=1,
            next_drop_time=2.0, first_above_time=1.0,
        )
        drop, st = codel_on_dequeue(st, 0.02, 2.0, occupancy=10)
        assert drop and st.drop_count == 2
        assert st.next_drop_time == pytest.approx(2.0 + 0.1 / math.sqrt(2.0))

    def test_leaves_dropping_when_sojourn_dips(self):
        st = CodelState(
            target=0.005, interval=0.1, dropping=True, drop_count=4,
            next_drop_time=2.0, first_above_time=1.0,
        )
        drop, st = codel_on_dequeue(st, 0.001, 1.9, occupancy=10)
        assert not drop and not st.dropping and st.first_above_time is None

    def test_scheme_acts_at_dequeue_only(self):
        scheme = Codel()
        assert scheme.enqueue_probability(0.0, 100) == 0.0


class TestPie:
    def test_pi_step_arithmetic(self):
        st = PieState(drop_prob=0.0, qdelay_old=0.050, alpha_gain=0.125, beta_gain=1.25)
        out = pie_update(st, 0.060, target=0.040)
        assert out.drop_prob == pytest.approx(0.015, abs=1e-12)
        assert out.qdelay_old == 0.060

    def test_unchanged_at_steady_target(self):
        st = PieState(drop_prob=0.2, qdelay_old=0.040)
        out = pie_update(st, 0.040, target=0.040)
        assert out.drop_prob == pytest.approx(0.2, abs=1e-12)

    def test_clamps_at_zero(self):
        st = PieState(drop_prob=0.001, qdelay_old=0.1)
        out = pie_update(st, 0.0, target=0.040)
        assert out.drop_prob == 0.0

    def test_clamps_at_one(self):
        st = PieState(drop_prob=0.999, qdelay_old=0.0)
        out = pie_update(st, 5.0, target=0.040)
        assert out.drop_prob == 1.0

    def test_clamps_under_random_updates(self):
        rng = random.Random(41)
        st = PieState()
        for _ in range(10000):
            st = pie_update(st, rng.uniform(0, 0.5), target=0.040)
            assert 0.0 <= st.drop_prob <= 1.0

    def test_scheme_updates_on_timer(self):
        scheme = Pie(target=0.040, capacity_pkts=6250.0, update_period=0.015)
        assert scheme.enqueue_probability(0.0, 500) == 0.0  # before first interval
        p = scheme.enqueue_probability(0.015, 500)  # qdelay = 0.08 > target
        assert p > 0.0


class TestDropTail:
    def test_zero_probability_always(self):
        scheme = DropTail()
        for q_cur in (0, 1, 500, 10**6):
            assert scheme.enqueue_probability(0.0, q_cur) == 0.0

    def test_drops_exactly_when_full_against_reference(self):
        # brute-force reference: a plain bounded counter
        rng = random.Random(47)
        scheme = DropTail()
        q = QueueState(10)
        ref_occupancy = 0
        for step in range(5000):
            if rng.random() < 0.7:
                p = scheme.enqueue_probability(step * 1e-3, q.occupancy)
                decision = admit(q, PacketRecord(0, step, 1000), p, rng.random())
                if ref_occupancy == 10:
                    assert decision is DropDecision.FORCED_DROP
                else:
                    assert decision is DropDecision.ACCEPT
                    ref_occupancy += 1
            elif q.occupancy:
                q.pop()
                ref_occupancy -= 1
            assert q.occupancy == ref_occupancy
