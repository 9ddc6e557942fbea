import math

import pytest
from hypothesis import given, settings, strategies as st

from manetsim.engine import RandomStream, seconds
from manetsim.mobility import (MobilityPlan, Leg, PositionIndex, format_movement,
                               generate_plan, parse_movement, position_at)

AREA = (500.0, 500.0)


def _plan_one_leg():
    plan = MobilityPlan(1, 500.0, 500.0, 100.0, pause_s=50.0)
    plan.initial.append((0.0, 0.0))
    plan.legs.append([Leg(0.0, 100.0, 0.0, 10.0, 10.0)])
    return plan


def test_linear_interpolation_midleg():
    plan = _plan_one_leg()
    assert position_at(plan, 0, 5.0) == (50.0, 0.0)


def test_pause_holds_at_waypoint():
    plan = _plan_one_leg()
    assert position_at(plan, 0, 30.0) == (100.0, 0.0)


def test_initial_position_at_t0():
    plan = _plan_one_leg()
    assert position_at(plan, 0, 0.0) == (0.0, 0.0)


def test_unknown_node_is_an_error():
    plan = _plan_one_leg()
    with pytest.raises(KeyError):
        position_at(plan, 3, 0.0)


def test_pause_beyond_duration_leaves_single_leg():
    plan = generate_plan(10, AREA, 200.0, 2.0, 1.0, 150.0, RandomStream(1, "mobility"))
    for legs in plan.legs:
        assert len(legs) == 1  # first arrival + 200 s pause passes 150 s


def test_speeds_inside_paper_range():
    plan = generate_plan(50, AREA, 2.0, 25.0, 1.0, 150.0, RandomStream(2, "mobility"))
    for legs in plan.legs:
        for leg in legs:
            assert 1.0 <= leg.speed <= 25.0


def test_degenerate_speed_range():
    plan = generate_plan(5, AREA, 10.0, 5.0, 5.0, 150.0, RandomStream(3, "mobility"))
    assert all(leg.speed == 5.0 for legs in plan.legs for leg in legs)


def test_zero_speed_means_static_plan():
    plan = generate_plan(4, AREA, 0.0, 0.0, 0.0, 150.0, RandomStream(4, "mobility"))
    assert all(len(legs) == 0 for legs in plan.legs)


def test_invalid_ranges_rejected():
    stream = RandomStream(0, "mobility")
    with pytest.raises(ValueError):
        generate_plan(0, AREA, 0.0, 2.0, 1.0, 150.0, stream)
    with pytest.raises(ValueError):
        generate_plan(5, AREA, 0.0, 1.0, 2.0, 150.0, stream)
    with pytest.raises(ValueError):
        generate_plan(5, AREA, -1.0, 2.0, 1.0, 150.0, stream)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 60.0), st.floats(1.0, 25.0))
def test_generated_plan_invariants(seed, pause, vmax):
    plan = generate_plan(6, AREA, pause, vmax, 1.0, 150.0,
                         RandomStream(seed, "mobility"))
    for node, legs in enumerate(plan.legs):
        px, py = plan.initial[node]
        assert 0.0 <= px <= 500.0 and 0.0 <= py <= 500.0
        prev_arrival = None
        for leg in legs:
            assert 0.0 <= leg.x <= 500.0 and 0.0 <= leg.y <= 500.0
            dist = math.hypot(leg.x - px, leg.y - py)
            travel = leg.arrival_s - leg.depart_s
            if travel > 0:
                v = dist / travel
                assert abs(v - leg.speed) <= 1e-9 * leg.speed
            if prev_arrival is not None:
                assert abs((leg.depart_s - prev_arrival) - pause) < 1e-9
            prev_arrival = leg.arrival_s
            px, py = leg.x, leg.y
        # sampled positions stay inside the area
        for k in range(0, 150, 7):
            x, y = position_at(plan, node, float(k))
            assert -1e-9 <= x <= 500.0 + 1e-9 and -1e-9 <= y <= 500.0 + 1e-9


def test_same_stream_same_plan():
    p1 = generate_plan(8, AREA, 5.0, 10.0, 1.0, 150.0, RandomStream(9, "mobility"))
    p2 = generate_plan(8, AREA, 5.0, 10.0, 1.0, 150.0, RandomStream(9, "mobility"))
    assert format_movement(p1) == format_movement(p2)


def test_movement_file_round_trips_bit_exactly():
    plan = generate_plan(10, AREA, 5.0, 10.0, 1.0, 150.0, RandomStream(5, "mobility"))
    text = format_movement(plan)
    again = format_movement(parse_movement(text, 150.0))
    assert text == again
    for line in text.splitlines():
        parts = line.split()
        assert parts[0] == "node"
        assert parts[2] in ("init", "at")


def test_movement_file_ordering():
    plan = generate_plan(5, AREA, 1.0, 10.0, 1.0, 60.0, RandomStream(6, "mobility"))
    lines = format_movement(plan).splitlines()
    keys = []
    for line in lines:
        parts = line.split()
        node = int(parts[1])
        t = -1.0 if parts[2] == "init" else float(parts[3])
        keys.append((node, t))
    assert keys == sorted(keys)


def test_parse_rejects_malformed_lines():
    with pytest.raises(ValueError):
        parse_movement("node 0 teleport 1 2\n")
    with pytest.raises(ValueError):
        parse_movement("node 0 init 1.0\n")
    with pytest.raises(ValueError):
        parse_movement("node 1 init 0.0 0.0\n")  # node 0 missing


def test_position_index_matches_position_at():
    plan = generate_plan(6, AREA, 2.0, 15.0, 1.0, 100.0, RandomStream(11, "mobility"))
    text = format_movement(plan)
    parsed = parse_movement(text, 100.0)
    idx = PositionIndex(parsed)
    for t in (0.0, 3.7, 12.2, 50.0, 99.9):
        for node in range(6):
            ex, ey = position_at(parsed, node, t)
            ix, iy = idx.pos(node, seconds(t))
            assert abs(ex - ix) < 1e-6 and abs(ey - iy) < 1e-6


def test_position_index_motion_windows():
    plan = MobilityPlan(2, 500.0, 500.0, 100.0)
    plan.initial = [(0.0, 0.0), (10.0, 10.0)]
    plan.legs = [[Leg(10.0, 100.0, 0.0, 10.0, 20.0)], []]
    idx = PositionIndex(plan)
    assert not idx.any_motion(seconds(0.0), seconds(9.0))
    assert idx.any_motion(seconds(9.5), seconds(10.5))
    assert idx.any_motion(seconds(15.0), seconds(16.0))
    assert not idx.any_motion(seconds(21.0), seconds(30.0))
