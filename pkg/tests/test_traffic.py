import pytest

from manetsim.engine import NS_PER_S, RandomStream
from manetsim.traffic import (Connection, format_traffic, generate_plan,
                              parse_traffic)


def test_paper_cell_connection_count():
    plan = generate_plan(10, 20, RandomStream(0, "traffic"), 150.0)
    assert len(plan.connections) == 20
    assert all(c.src != c.dst for c in plan.connections)
    assert len({(c.src, c.dst) for c in plan.connections}) == 20


def test_two_nodes_only_two_pairs():
    plan = generate_plan(2, 20, RandomStream(1, "traffic"), 150.0)
    assert {(c.src, c.dst) for c in plan.connections} <= {(0, 1), (1, 0)}
    assert len(plan.connections) == 2


def test_same_stream_identical_plan():
    p1 = generate_plan(10, 20, RandomStream(2, "traffic"), 150.0)
    p2 = generate_plan(10, 20, RandomStream(2, "traffic"), 150.0)
    assert format_traffic(p1) == format_traffic(p2)


def test_start_times_within_window():
    plan = generate_plan(30, 40, RandomStream(3, "traffic"), 150.0)
    assert all(0.0 <= c.start_s < 50.0 for c in plan.connections)


def test_emission_spacing_exact_quarter_second():
    conn = Connection(0, 1, 10.0, 4.0, 512)
    times = list(conn.emission_times_ns(150.0))
    assert times[0] == 10 * NS_PER_S
    gaps = {b - a for a, b in zip(times, times[1:])}
    assert gaps == {250_000_000}


def test_flow_packet_count_matches_rate_arithmetic():
    conn = Connection(0, 1, 10.0, 4.0, 512)
    assert len(list(conn.emission_times_ns(150.0))) == 560  # floor((150-10)*4)


def test_invalid_args_rejected():
    with pytest.raises(ValueError):
        generate_plan(1, 20, RandomStream(0, "traffic"), 150.0)
    with pytest.raises(ValueError):
        generate_plan(5, 0, RandomStream(0, "traffic"), 150.0)


def test_traffic_file_round_trip():
    plan = generate_plan(10, 20, RandomStream(4, "traffic"), 150.0)
    text = format_traffic(plan)
    again = format_traffic(parse_traffic(text, 10))
    assert text == again
    starts = [c.start_s for c in plan.connections]
    assert starts == sorted(starts)


def test_parse_rejects_malformed():
    with pytest.raises(ValueError):
        parse_traffic("conn 0 1 begins 5.0 rate 4.0 size 512\n")
