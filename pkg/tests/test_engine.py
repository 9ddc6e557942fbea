import pytest
from hypothesis import given, strategies as st

from manetsim.engine import (Engine, Event, NS_PER_S, RandomStream,
                             SchedulingError, fmt_time, seconds)


def _collector(engine, log, tag):
    return Event(0, None, tag, lambda: log.append((engine.now, tag)))


def test_dispatch_order_ties_by_insertion():
    eng = Engine()
    log = []
    for at, tag in ((5 * NS_PER_S, "a"), (3 * NS_PER_S, "b"), (3 * NS_PER_S, "c")):
        eng.schedule(Event(at, None, tag, lambda t=tag: log.append(t)))
    eng.run_until(10 * NS_PER_S)
    assert log == ["b", "c", "a"]


def test_event_at_zero_runs_before_clock_advances():
    eng = Engine()
    seen = []
    eng.schedule(Event(0, None, "t0", lambda: seen.append(eng.now)))
    eng.run_until(NS_PER_S)
    assert seen == [0]


def test_scheduling_in_the_past_is_a_hard_error():
    eng = Engine()
    eng.schedule(Event(5, None, "x", lambda: eng.schedule(
        Event(eng.now - 1, None, "late", lambda: None))))
    with pytest.raises(SchedulingError):
        eng.run_until(10)


def test_run_until_empty_queue():
    eng = Engine()
    n, clock = eng.run_until(seconds(150.0))
    assert n == 0
    assert clock == 150 * NS_PER_S


def test_run_until_leaves_future_events_queued():
    eng = Engine()
    hits = []
    for t in (10.0, 20.0, 160.0):
        eng.schedule(Event(seconds(t), None, "e", lambda t=t: hits.append(t)))
    n, clock = eng.run_until(seconds(150.0))
    assert n == 2 and hits == [10.0, 20.0]
    assert clock == seconds(150.0)
    assert eng.pending() == 1


def test_dispatch_times_non_decreasing():
    eng = Engine()
    times = []
    stream = RandomStream(7, "scatter")
    for _ in range(200):
        at = round(stream.uniform(0, 100) * NS_PER_S)
        eng.schedule(Event(at, None, "e", lambda: times.append(eng.now)))
    eng.run_until(seconds(100.0))
    assert times == sorted(times)
    assert len(times) == 200


def test_stream_determinism_and_separation():
    a1 = RandomStream(42, "mobility")
    a2 = RandomStream(42, "mobility")
    b = RandomStream(42, "traffic")
    seq1 = [a1.uniform(0, 1) for _ in range(50)]
    seq2 = [a2.uniform(0, 1) for _ in range(50)]
    seqb = [b.uniform(0, 1) for _ in range(50)]
    assert seq1 == seq2
    assert seq1 != seqb


@given(st.floats(-1e6, 1e6), st.floats(1e-9, 1e6), st.integers(0, 2**32))
def test_uniform_stays_in_half_open_range(lo, width, seed):
    stream = RandomStream(seed, "prop")
    hi = lo + width
    for _ in range(20):
        v = stream.uniform(lo, hi)
        assert lo <= v < hi


def test_uniform_rejects_empty_range():
    stream = RandomStream(0, "x")
    with pytest.raises(ValueError):
        stream.uniform(1.0, 1.0)
    with pytest.raises(ValueError):
        stream.uniform(2.0, 1.0)


def test_fmt_time_is_nine_decimals():
    assert fmt_time(0) == "0.000000000"
    assert fmt_time(10_250_000_000) == "10.250000000"
    assert fmt_time(1) == "0.000000001"
