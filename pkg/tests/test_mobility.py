import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2icdr.mobility import (
    STREET_TOL,
    GridMap,
    Heading,
    InvalidStateError,
    MobilityParams,
    Turn,
    VehicleState,
    advance,
    choose_turn,
    distance,
    place_vehicles,
    predict_trajectories,
)

GRID = GridMap(30.0, 90.0)


class FixedDraws:
    """rng stand-in returning a scripted sequence from ``random()``."""

    def __init__(self, *values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_heading_turns():
    assert Heading.EAST.left() is Heading.NORTH
    assert Heading.SOUTH.left() is Heading.EAST
    assert Heading.EAST.right() is Heading.SOUTH
    assert Heading.NORTH.right() is Heading.EAST
    for h in Heading:
        assert h.left().right() is h


def test_straight_without_intersection():
    s = VehicleState(1, (5.0, 0.0), Heading.EAST, 10.0)
    out = advance(s, GRID, MobilityParams(0.5), FixedDraws())
    assert out.position == (15.0, 0.0)
    assert out.direction is Heading.EAST


def test_forced_straight_through_intersection():
    s = VehicleState(1, (25.0, 0.0), Heading.EAST, 10.0)
    out = advance(s, GRID, MobilityParams(1.0), np.random.default_rng(0))
    assert out.position == pytest.approx((35.0, 0.0), abs=1e-12)
    assert out.direction is Heading.EAST


def test_left_turn_at_intersection():
    s = VehicleState(1, (25.0, 0.0), Heading.EAST, 10.0)
    turns = []
    # p_o = 0: u < 0.5 turns left
    out = advance(s, GRID, MobilityParams(0.0), FixedDraws(0.1), turns)
    assert out.position == pytest.approx((30.0, 5.0), abs=1e-12)
    assert out.direction is Heading.NORTH
    assert turns == [Turn.LEFT]


def test_left_turn_matches_one_metre_steps():
    # Landing on an intersection draws once; leaving it does not, so ten
    # 1 m steps consume the same draws as one 10 m step.
    params = MobilityParams(0.0)
    s = VehicleState(1, (25.0, 0.0), Heading.EAST, 1.0)
    rng = FixedDraws(0.1)
    for _ in range(10):
        s = advance(s, GRID, params, rng)
    assert s.position == pytest.approx((30.0, 5.0), abs=1e-12)
    assert s.direction is Heading.NORTH


@pytest.mark.parametrize("seed", range(5))
def test_coarse_step_equals_fine_steps(seed):
    params = MobilityParams(0.5)
    start = place_vehicles(10, GRID, 17.0, np.random.default_rng(seed))
    for s in start:
        coarse, fine = s, VehicleState(s.node_id, s.position, s.direction, 1.0)
        r1, r2 = np.random.default_rng(seed + 100), np.random.default_rng(seed + 100)
        for _ in range(6):
            coarse = advance(coarse, GRID, params, r1)
            for _ in range(17):
                fine = advance(fine, GRID, params, r2)
            assert np.allclose(coarse.position, fine.position, atol=1e-9)
            assert coarse.direction is fine.direction


def test_turn_draw_thresholds():
    p = MobilityParams(0.5)
    assert choose_turn(FixedDraws(0.49), p) is Turn.STRAIGHT
    assert choose_turn(FixedDraws(0.5), p) is Turn.LEFT
    assert choose_turn(FixedDraws(0.74), p) is Turn.LEFT
    assert choose_turn(FixedDraws(0.75), p) is Turn.RIGHT
    assert MobilityParams(0.2).turn_probs == pytest.approx((0.2, 0.4, 0.4))


def test_invalid_states():
    with pytest.raises(InvalidStateError):
        advance(VehicleState(1, (3.0, 7.0), Heading.EAST, 1.0), GRID, MobilityParams(), None)
    with pytest.raises(InvalidStateError):
        VehicleState(1, (0.0, 0.0), Heading.EAST, -1.0)
    with pytest.raises(ValueError):
        MobilityParams(1.5)
    with pytest.raises(ValueError):
        GridMap(30.0, 100.0)


def test_wraparound():
    s = VehicleState(1, (85.0, 0.0), Heading.EAST, 10.0)
    out = advance(s, GRID, MobilityParams(1.0), np.random.default_rng(0))
    assert out.position == pytest.approx((-85.0, 0.0))


def test_zero_speed_trajectory():
    s = VehicleState(1, (12.0, 30.0), Heading.WEST, 0.0)
    t = predict_trajectories([s], GRID, MobilityParams(), 2, np.random.default_rng(0))
    assert t.position(1, 1) == (12.0, 30.0)
    assert t.position(1, 2) == (12.0, 30.0)


def test_straight_trajectory():
    s = VehicleState(1, (0.0, 0.0), Heading.EAST, 10.0)
    t = predict_trajectories([s], GRID, MobilityParams(1.0), 3, np.random.default_rng(0))
    assert [t.position(1, k) for k in (1, 2, 3)] == [(10.0, 0.0), (20.0, 0.0), (30.0, 0.0)]


def test_trajectory_determinism():
    def table(seed):
        rng = np.random.default_rng(seed)
        states = place_vehicles(2, GRID, 10.0, rng)
        buf = io.StringIO()
        predict_trajectories(states, GRID, MobilityParams(), 8, rng).to_csv(buf)
        return buf.getvalue()

    assert table(3) == table(3)
    assert table(3) != table(4)


def test_distance_examples():
    assert distance((0, 0), (0, 0)) == 0
    assert distance((3, 0), (0, 4)) == 5
    assert distance((30, 0), (0, 0)) == 30


@given(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)),
       st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)))
def test_distance_metric(a, b):
    d = distance(a, b)
    assert d >= 0
    assert d == distance(b, a)
    assert (d == 0) == (a == b)


def test_placement_on_streets(rng):
    states = place_vehicles(2000, GRID, 10.0, rng)
    for s in states:
        cross = s.position[1] if s.direction.horizontal else s.position[0]
        assert GRID.on_street_line(cross)
        assert all(-90.0 <= c < 90.0 for c in s.position)
    counts = np.bincount([int(s.direction) for s in states], minlength=5)[1:]
    assert counts.min() > 400


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), speed=st.floats(0.5, 29.5), p_o=st.floats(0, 1))
def test_street_adherence_and_path_length(seed, speed, p_o):
    rng = np.random.default_rng(seed)
    params = MobilityParams(p_o)
    s = place_vehicles(1, GRID, speed, rng)[0]
    for _ in range(30):
        nxt = advance(s, GRID, params, rng)
        assert GRID.on_street(nxt.position)
        # speed below the block size: at most one corner, so the Manhattan
        # length of the (wrapped) displacement is the path length
        step = np.abs(np.subtract(nxt.position, s.position))
        step = np.minimum(step, GRID.period - step)
        assert math.isclose(step.sum(), speed, abs_tol=STREET_TOL)
        s = nxt
