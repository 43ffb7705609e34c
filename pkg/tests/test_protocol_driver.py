"""Direct tests of the per-flow monitoring driver with a stubbed network:
probe trains, reply aggregation, the filter/fallback chain, and the
hold-last network-state rule."""

import numpy as np
import pytest

from manetsim.packets import PacketClass
from manetsim.routing import ProtocolParams, ScoringWeights, SourceProtocol


class Harness:
    """Minimal engine: manual clock, recorded sends, runnable schedule."""

    def __init__(self, adj, n=6, w_ts=0.0):
        self.clock = 0.0
        self.sent = []
        self.pending = []  # (time, action)
        ts = np.full((n, n), 3, dtype=np.int64)
        np.fill_diagonal(ts, 0)
        self.ts = ts
        self.protocol = SourceProtocol(
            flow_id=0, src=0, dst=n - 1,
            params=ProtocolParams(weights=ScoringWeights(w_ts)),
            ts_matrix=ts, connectivity=lambda t: adj,
            send=self.sent.append, now=lambda: self.clock,
            schedule=self.schedule)

    def schedule(self, at, action):
        self.pending.append((at, action))

    def run_pending(self, until):
        while True:
            due = [(t, a) for t, a in self.pending if t <= until]
            if not due:
                break
            due.sort(key=lambda x: x[0])
            t, action = due[0]
            self.pending.remove((t, action))
            self.clock = max(self.clock, t)
            action()
        self.clock = until


def diamond(n=6):
    # 0 -> {1,2} -> {3,4} -> 5 grid with two short and两 longer routes
    return {0: [1, 2], 1: [0, 3], 2: [0, 4], 3: [1, 5], 4: [2, 5],
            5: [3, 4]}


def reply_payload(iteration, path, loss=0.0, delay=0.05, jitter=0.001,
                  bw=300_000.0, margin=15.0, speed=0.5):
    return {"iteration": iteration, "path": path, "received": 10, "train": 10,
            "loss": loss, "mean_delay_s": delay, "jitter_s": jitter,
            "rm_margin_db": margin, "bottleneck_bps": bw,
            "rel_speed_mps": speed}


class FakeReply:
    def __init__(self, payload):
        self.payload = payload


class TestProbeTrains:
    def test_train_covers_every_discovered_path(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        h.run_pending(until=1.0)  # flush the staggered sends
        probes = [p for p in h.sent if p.klass is PacketClass.PROBE]
        paths = {p.route for p in probes}
        iteration = h.protocol.iterations[0]
        assert paths == set(iteration.discovered)
        for path in paths:
            train = [p for p in probes if p.route == path]
            assert len(train) == 10
            assert sorted(p.seq for p in train) == list(range(10))

    def test_bootstrap_route_is_first_discovered(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        assert h.protocol.active_route == h.protocol.iterations[0].discovered[0]


class TestDecision:
    def decide(self, h, replies):
        iteration = h.protocol.iterations[-1]
        for path, overrides in replies.items():
            payload = reply_payload(iteration.index, path, **overrides)
            h.protocol.on_probe_reply_at_source(FakeReply(payload))
        h.run_pending(until=iteration.started_at
                      + h.protocol.params.decision_delay_s)
        return iteration

    def test_no_replies_means_no_route_and_hold_last_nstate(self):
        h = Harness(diamond())
        h.protocol.nstate = 0.42
        h.protocol.start_iteration()
        iteration = self.decide(h, {})
        assert iteration.selected is None
        assert h.protocol.active_route is None
        assert iteration.nstate == 0.42  # hold-last
        assert iteration.t_routing == pytest.approx(10 * 0.42 + 3)

    def test_survivor_beats_fallback(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        it = h.protocol.iterations[0]
        good, bad = it.discovered[0], it.discovered[1]
        iteration = self.decide(h, {
            good: {"loss": 0.05},
            bad: {"loss": 0.9},   # fails the customer request
        })
        assert iteration.survivors == [good]
        assert iteration.selected == good

    def test_fallback_to_best_usable_when_filter_empties(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        it = h.protocol.iterations[0]
        a, b = it.discovered[0], it.discovered[1]
        iteration = self.decide(h, {
            a: {"loss": 0.9},
            b: {"loss": 0.5},
        })
        assert iteration.survivors == []
        assert iteration.selected == b  # best score among usable paths

    def test_missing_reply_marks_path_unusable(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        it = h.protocol.iterations[0]
        answered = it.discovered[1]
        iteration = self.decide(h, {answered: {}})
        assert list(iteration.qualifications) == [answered]
        assert iteration.selected == answered

    def test_next_iteration_scheduled_at_t_routing(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        it = h.protocol.iterations[0]
        self.decide(h, {it.discovered[0]: {}})
        assert len(h.protocol.iterations) == 1
        h.run_pending(until=it.started_at + it.t_routing + 1e-9)
        assert len(h.protocol.iterations) == 2

    def test_late_reply_ignored_after_decision(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        it = h.protocol.iterations[0]
        self.decide(h, {})
        h.protocol.on_probe_reply_at_source(
            FakeReply(reply_payload(it.index, it.discovered[0])))
        assert it.index not in h.protocol._replies

    def test_ts_argmax_at_full_weight(self):
        h = Harness(diamond(), w_ts=1.0)
        # tie strengths favor the 2 -> 4 branch
        h.ts[0, 2] = h.ts[2, 4] = h.ts[4, 5] = 4
        h.ts[0, 1] = h.ts[1, 3] = h.ts[3, 5] = 1
        h.protocol.start_iteration()
        it = h.protocol.iterations[0]
        iteration = self.decide(h, {path: {} for path in it.discovered})
        assert iteration.selected == (0, 2, 4, 5)


class TestExposureAccounting:
    def test_time_weighted_mean_over_decision_intervals(self):
        h = Harness(diamond())
        h.protocol.start_iteration()
        it0 = h.protocol.iterations[0]
        path = it0.discovered[0]
        TestDecision().decide(h, {path: {}})
        # one decision interval from t=2.0 (decision) to finalize at t=10
        h.protocol.finalize(10.0)
        expected_ts = it0.selected_mean_ts
        assert h.protocol.ts_time_mean == pytest.approx(expected_ts)

    def test_no_decisions_yield_zero(self):
        h = Harness(diamond())
        h.protocol.finalize(10.0)
        assert h.protocol.ts_time_mean == 0.0
