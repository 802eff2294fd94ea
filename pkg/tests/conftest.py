import pytest

from aqmsim import TopologyConfig


@pytest.fixture
def small_topology():
    """Small, fast dumbbell: 2 Mbps bottleneck (250 pkt/s), 50-packet buffer."""

    def make(**overrides):
        args = dict(
            n_flows=4,
            bottleneck_rate=2e6,
            bottleneck_delay=0.005,
            edge_rate=10e6,
            edge_delay=0.001,
            buffer_packets=50,
            packet_size=1000,
        )
        args.update(overrides)
        return TopologyConfig(**args)

    return make
