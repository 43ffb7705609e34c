import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from manetsim.radio import Medium, RadioSpec, transmission_delay


def static_medium(positions, spec=None):
    spec = spec or RadioSpec()
    return Medium(spec, lambda node, t: positions[node],
                  list(range(len(positions))))


class TestRadioSpec:
    def test_calibration_identity_at_range(self):
        spec = RadioSpec()
        assert spec.snr(spec.tx_range_m) == pytest.approx(
            spec.snr_threshold_db, abs=1e-12)

    def test_snr_gain_when_halving_distance(self):
        # log-distance with exponent 3: 10*3*log10(120/60) dB
        spec = RadioSpec()
        gain = spec.snr(60.0) - spec.snr(120.0)
        assert gain == pytest.approx(30.0 * math.log10(2.0), abs=1e-9)
        assert gain == pytest.approx(9.0309, abs=1e-3)

    def test_snr_decreasing_in_distance(self):
        spec = RadioSpec()
        snrs = [spec.snr(d) for d in (10, 30, 60, 90, 119, 120)]
        assert snrs == sorted(snrs, reverse=True)

    def test_corruption_small_at_high_margin(self):
        spec = RadioSpec()
        assert spec.corruption_probability(spec.snr_threshold_db + 20.0) <= 0.01

    def test_corruption_peaks_at_threshold(self):
        spec = RadioSpec()
        assert spec.corruption_probability(spec.snr_threshold_db) == \
            pytest.approx(spec.max_corruption_prob)

    @given(st.floats(min_value=-30, max_value=80),
           st.floats(min_value=0, max_value=80))
    @settings(max_examples=200, deadline=None)
    def test_corruption_monotone_nonincreasing(self, snr, bump):
        spec = RadioSpec()
        assert spec.corruption_probability(snr + bump) <= \
            spec.corruption_probability(snr) + 1e-15


class TestLinkState:
    def test_boundary_inclusive(self):
        medium = static_medium({0: (0.0, 0.0), 1: (120.0, 0.0)})
        assert medium.link_state(0, 1, 0.0).usable is True

    def test_just_outside(self):
        medium = static_medium({0: (0.0, 0.0), 1: (121.0, 0.0)})
        assert medium.link_state(0, 1, 0.0).usable is False

    def test_self_link_rejected(self):
        medium = static_medium({0: (0.0, 0.0), 1: (50.0, 0.0)})
        with pytest.raises(ValueError):
            medium.link_state(0, 0, 0.0)


class TestNeighborSet:
    def test_isolated_node(self):
        medium = static_medium({0: (0.0, 0.0), 1: (500.0, 0.0),
                                2: (500.0, 500.0)})
        assert medium.neighbor_set(0, 0.0) == set()

    def test_three_nodes_on_a_line(self):
        medium = static_medium({0: (0.0, 0.0), 1: (100.0, 0.0),
                                2: (200.0, 0.0)})
        assert medium.neighbor_set(1, 0.0) == {0, 2}
        assert medium.neighbor_set(0, 0.0) == {1}
        assert medium.neighbor_set(2, 0.0) == {1}

    def test_symmetry_on_random_topology(self):
        rng = random.Random(4)
        positions = {n: (rng.uniform(0, 520), rng.uniform(0, 520))
                     for n in range(20)}
        medium = static_medium(positions)
        for a in range(20):
            for b in medium.neighbor_set(a, 0.0):
                assert a in medium.neighbor_set(b, 0.0)


class TestTransmit:
    def test_transmission_delay_of_full_packet(self):
        # 1500 bytes at 11 Mbps, no contention
        delay = transmission_delay(RadioSpec(), 1500, 1.0)
        assert delay == pytest.approx(1500 * 8 / 11e6)
        assert delay == pytest.approx(1.0909e-3, rel=1e-3)

    def test_load_factor_halves_effective_rate(self):
        spec = RadioSpec()
        assert transmission_delay(spec, 1500, 2.0) == \
            pytest.approx(2.0 * transmission_delay(spec, 1500, 1.0))

    def test_sub_unity_load_does_not_speed_up(self):
        spec = RadioSpec()
        assert transmission_delay(spec, 1500, 0.25) == \
            transmission_delay(spec, 1500, 1.0)

    def test_unusable_link_drops_with_cause(self):
        medium = static_medium({0: (0.0, 0.0), 1: (200.0, 0.0)})
        link = medium.link_state(0, 1, 0.0)
        outcome = medium.transmit(link, 1500, 1.0, random.Random(1))
        assert outcome.status == "dropped"
        assert outcome.cause == "link-break"

    def test_delivery_delay_includes_transmission(self):
        medium = static_medium({0: (0.0, 0.0), 1: (20.0, 0.0)})
        link = medium.link_state(0, 1, 0.0)
        outcome = medium.transmit(link, 1500, 1.0, random.Random(1))
        assert outcome.delivered
        assert outcome.delay_s >= transmission_delay(medium.spec, 1500, 1.0) > 0

    def test_corruption_rate_matches_curve(self):
        # at exactly the threshold the corruption probability is the maximum
        spec = RadioSpec(max_corruption_prob=0.2)
        medium = static_medium({0: (0.0, 0.0), 1: (120.0, 0.0)}, spec)
        link = medium.link_state(0, 1, 0.0)
        rng = random.Random(17)
        n = 20_000
        corrupted = sum(
            medium.transmit(link, 100, 1.0, rng).status == "corrupted"
            for _ in range(n))
        assert corrupted / n == pytest.approx(0.2, abs=0.01)

    def test_close_link_never_corrupts(self):
        medium = static_medium({0: (0.0, 0.0), 1: (10.0, 0.0)})
        link = medium.link_state(0, 1, 0.0)
        rng = random.Random(3)
        assert all(medium.transmit(link, 100, 1.0, rng).delivered
                   for _ in range(2000))


class TestConnectivityGraph:
    def test_unit_disk_graph(self):
        rng = random.Random(9)
        positions = {n: (rng.uniform(0, 520), rng.uniform(0, 520))
                     for n in range(15)}
        medium = static_medium(positions)
        adj = medium.connectivity(0.0)
        for a in range(15):
            for b in range(15):
                if a == b:
                    continue
                d = math.dist(positions[a], positions[b])
                assert (b in adj[a]) == (d <= 120.0)

    def test_adjacency_sorted(self):
        medium = static_medium({0: (0.0, 0.0), 1: (50.0, 0.0),
                                2: (50.0, 50.0)})
        adj = medium.connectivity(0.0)
        for nbrs in adj.values():
            assert nbrs == sorted(nbrs)
