import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from startrail.popularity import PopularityState
from startrail.types import ConfigError, NodeConfig, compute_cid

A = compute_cid(b"a")
B = compute_cid(b"b")
CIDS = [compute_cid(bytes([i])) for i in range(6)]


def state(threshold=2, hop=10.0, samples=3, start=0.0):
    return PopularityState(
        NodeConfig(popularity_threshold=threshold, window_hop=hop, window_samples=samples), start
    )


class WindowOracle:
    """Keeps every observation; counts those whose hop index falls in the current window."""

    def __init__(self, hop, samples, start=0.0):
        self.hop, self.samples, self.start = hop, samples, start
        self.seen: list[tuple[object, float]] = []

    def index(self, t):
        return math.floor((t - self.start) / self.hop)

    def observe(self, cid, t):
        self.seen.append((cid, t))

    def window_sum(self, cid, now):
        cur = self.index(now)
        return sum(1 for c, t in self.seen if c == cid and cur - self.samples < self.index(t) <= cur)


def test_twice_is_popular():
    p = state()
    assert not p.observe_and_test(A, 0.0)
    assert p.observe_and_test(A, 5.0)


def test_35_seconds_apart_not_popular():
    p = state()
    assert not p.observe_and_test(A, 0.0)
    assert not p.observe_and_test(A, 35.0)


def test_threshold_one():
    assert state(threshold=1).observe_and_test(A, 3.0)


def test_same_window_different_samples():
    p = state()
    p.observe_and_test(A, 0.0)
    assert p.observe_and_test(A, 25.0)


def test_roll_examples():
    p = state()
    p.roll(10.0)
    assert len(p.history) == 1 and not p.current.counts
    for t in (20.0, 30.0, 40.0, 50.0):
        p.roll(t)
    assert len(p.history) == 2
    with pytest.raises(ValueError):
        p.roll(55.0)


def test_idle_gap_expires_counts():
    p = state()
    p.observe_and_test(A, 1.0)
    p.observe_and_test(A, 2.0)
    p.maybe_roll(46.0)
    assert p.current.start == 40.0
    assert p.window_sum(A) == 0
    assert not p.observe_and_test(A, 46.0)


def test_window_sum_examples():
    p = state(threshold=10)
    assert p.window_sum(A) == 0
    for _ in range(3):
        p.observe_and_test(A, 1.0)
    assert p.window_sum(A) == 3
    q = state(threshold=10)
    for t in (1.0, 11.0, 21.0):
        q.observe_and_test(B, t)
    assert q.window_sum(B) == 3


def test_update_configs():
    p = state()
    p.observe_and_test(A, 0.0)
    p.update_configs(NodeConfig(popularity_threshold=1))
    assert p.observe_and_test(B, 1.0)

    q = state()
    q.observe_and_test(A, 0.0)
    q.observe_and_test(A, 10.0)
    q.observe_and_test(A, 20.0)
    assert len(q.history) == 2
    q.update_configs(NodeConfig(window_samples=2))
    assert len(q.history) == 1 and q.history[0].start == 10.0
    assert q.window_sum(A) == 2

    r = state()
    r.observe_and_test(A, 3.0)
    r.update_configs(NodeConfig())
    assert r.current.start == 0.0

    with pytest.raises(ConfigError):
        r.update_configs(NodeConfig(window_hop=0))
    assert r.hop == 10.0


def test_counts_positive_and_history_bounded():
    p = state(samples=3)
    rng = random.Random(5)
    t = 0.0
    for _ in range(500):
        t += rng.choice([0.0, 1.0, 7.5, 13.0, 31.0])
        p.observe_and_test(rng.choice(CIDS), t)
        assert len(p.history) <= 2
        assert p.current.start <= t < p.current.start + p.hop
        assert all(v >= 1 for s in [p.current, *p.history] for v in s.counts.values())


def run_trace(trace, hop, samples, threshold, ticks=()):
    """Replay ``trace`` against both the state and the oracle; return mismatches."""
    p = state(threshold=threshold, hop=hop, samples=samples)
    o = WindowOracle(hop, samples)
    events = sorted([(t, 0, c) for c, t in trace] + [(t, 1, None) for t in ticks],
                    key=lambda e: (e[0], e[1]))
    for t, kind, cid in events:
        if kind == 1:
            p.maybe_roll(t)
            continue
        o.observe(cid, t)
        popular = p.observe_and_test(cid, t)
        if popular != (o.window_sum(cid, t) >= threshold):
            return False
        for c in CIDS:
            if p.window_sum(c) != o.window_sum(c, t):
                return False
    return True


def random_trace(rng):
    hop = rng.choice([1.0, 2.5, 10.0])
    samples = rng.randint(1, 5)
    threshold = rng.randint(1, 4)
    t = 0.0
    trace = []
    for _ in range(rng.randint(1, 25)):
        # Quarter-second grid keeps boundary arithmetic exact.
        t += rng.randrange(0, int(hop * 4 * (samples + 2))) / 4
        trace.append((rng.choice(CIDS), t))
    ticks = [k * hop for k in range(int(t // hop) + 1)] if rng.random() < 0.5 else []
    return trace, hop, samples, threshold, ticks


def test_replay_oracle_10000_traces():
    rng = random.Random(2024)
    bad = [i for i in range(10_000) if not run_trace(*random_trace(rng))]
    assert bad == []


quarter_times = st.lists(st.integers(0, 400), min_size=1, max_size=40).map(
    lambda xs: [x / 4 for x in sorted(xs)]
)


@settings(max_examples=300, deadline=None)
@given(quarter_times, st.lists(st.integers(0, 5), min_size=40, max_size=40),
       st.integers(1, 5), st.integers(1, 4))
def test_replay_equivalence_property(times, picks, samples, threshold):
    trace = [(CIDS[picks[i]], t) for i, t in enumerate(times)]
    assert run_trace(trace, 10.0, samples, threshold)


@settings(max_examples=200, deadline=None)
@given(quarter_times, st.integers(1, 5))
def test_expiry(times, samples):
    hop = 10.0
    p = state(threshold=1000, hop=hop, samples=samples)
    for t in times:
        p.observe_and_test(A, t)
    last = times[-1]
    p.maybe_roll(last + samples * hop)
    assert p.window_sum(A) == 0
