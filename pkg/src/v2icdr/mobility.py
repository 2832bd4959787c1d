"""Manhattan-grid street map and vehicle motion.

Streets are the lines ``x = k * d_o`` and ``y = k * d_o``.  The simulated
region is the square ``[-extent, extent)`` in both coordinates and wraps
around as a torus, so vehicles never leave it.  The static node sits at the
origin, which is an intersection.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterable, Sequence, TextIO

import numpy as np

#: Tolerance used to decide whether a coordinate lies on a street line.
STREET_TOL = 1e-9


class InvalidStateError(ValueError):
    """Raised for a vehicle that is not on a street of the map."""


class Heading(IntEnum):
    EAST = 1
    NORTH = 2
    WEST = 3
    SOUTH = 4

    @property
    def unit(self) -> tuple[int, int]:
        return _UNIT[self]

    def left(self) -> "Heading":
        return Heading(self % 4 + 1)

    def right(self) -> "Heading":
        return Heading((self - 2) % 4 + 1)

    @property
    def horizontal(self) -> bool:
        return self in (Heading.EAST, Heading.WEST)


_UNIT = {
    Heading.EAST: (1, 0),
    Heading.NORTH: (0, 1),
    Heading.WEST: (-1, 0),
    Heading.SOUTH: (0, -1),
}


class Turn(IntEnum):
    STRAIGHT = 0
    LEFT = 1
    RIGHT = 2


@dataclass(frozen=True)
class GridMap:
    street_spacing: float = 30.0
    extent: float = 90.0

    def __post_init__(self):
        if not self.street_spacing > 0:
            raise ValueError("street_spacing must be positive")
        k = self.extent / self.street_spacing
        if not self.extent > 0 or abs(k - round(k)) > 1e-9:
            raise ValueError(
                "extent must be a positive integer multiple of street_spacing"
            )

    @property
    def period(self) -> float:
        return 2.0 * self.extent

    @property
    def lines_per_axis(self) -> int:
        return int(round(self.period / self.street_spacing))

    def on_street_line(self, c: float) -> bool:
        k = c / self.street_spacing
        return abs(k - round(k)) * self.street_spacing <= STREET_TOL

    def on_street(self, position: Sequence[float]) -> bool:
        x, y = position
        return self.on_street_line(x) or self.on_street_line(y)

    def wrap(self, c: float) -> float:
        e = self.extent
        return (c + e) % self.period - e


@dataclass(frozen=True)
class VehicleState:
    node_id: int
    position: tuple[float, float]
    direction: Heading
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise InvalidStateError("speed must be non-negative")


@dataclass(frozen=True)
class MobilityParams:
    go_straight_prob: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.go_straight_prob <= 1.0:
            raise ValueError("go_straight_prob must lie in [0, 1]")

    @property
    def turn_probs(self) -> tuple[float, float, float]:
        """Probabilities of (straight, left, right)."""
        side = (1.0 - self.go_straight_prob) / 2.0
        return self.go_straight_prob, side, side


def choose_turn(rng, params: MobilityParams) -> Turn:
    u = rng.random()
    p_straight, p_left, _ = params.turn_probs
    if u < p_straight:
        return Turn.STRAIGHT
    if u < p_straight + p_left:
        return Turn.LEFT
    return Turn.RIGHT


def _apply_turn(heading: Heading, turn: Turn) -> Heading:
    if turn is Turn.LEFT:
        return heading.left()
    if turn is Turn.RIGHT:
        return heading.right()
    return heading


def _check_state(state: VehicleState, grid: GridMap) -> None:
    x, y = state.position
    # The coordinate across the direction of travel must be a street line.
    cross = y if state.direction.horizontal else x
    if not grid.on_street_line(cross):
        raise InvalidStateError(
            f"node {state.node_id} at {state.position} heading "
            f"{state.direction.name} is off-street"
        )


def _snap(c: float, spacing: float) -> float:
    return round(c / spacing) * spacing


def advance(
    state: VehicleState,
    grid: GridMap,
    params: MobilityParams,
    rng,
    turns: list | None = None,
) -> VehicleState:
    """Move a vehicle forward by one time slot.

    The vehicle travels exactly ``state.speed`` metres along the streets.
    Every intersection it reaches during the move, including one it lands on
    exactly at the end of the slot, draws an independent turn decision from
    ``rng``.  Leaving an intersection does not draw again.

    Parameters
    ----------
    turns : list, optional
        When given, each turn decision taken is appended to it.
    """
    _check_state(state, grid)
    d_o = grid.street_spacing
    x, y = state.position
    heading = state.direction
    remaining = float(state.speed)

    while remaining > 0.0:
        ux, uy = heading.unit
        along = x if heading.horizontal else y
        sign = ux if heading.horizontal else uy
        k = along / d_o
        if abs(k - round(k)) * d_o <= STREET_TOL:
            gap = d_o
        elif sign > 0:
            gap = math.floor(k) * d_o + d_o - along
        else:
            gap = along - math.floor(k) * d_o
        if gap > remaining + STREET_TOL:
            x += ux * remaining
            y += uy * remaining
            remaining = 0.0
        else:
            along_new = _snap(along + sign * gap, d_o)
            if heading.horizontal:
                x = along_new
            else:
                y = along_new
            remaining = max(remaining - gap, 0.0)
            turn = choose_turn(rng, params)
            if turns is not None:
                turns.append(turn)
            heading = _apply_turn(heading, turn)
        x, y = grid.wrap(x), grid.wrap(y)

    return replace(state, position=(x, y), direction=heading)


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def place_vehicles(
    count: int, grid: GridMap, speed: float, rng, first_id: int = 1
) -> list[VehicleState]:
    """Drop vehicles uniformly on the street network.

    The heading is uniform over the four directions and the position is
    uniform along the streets running in that heading's orientation.
    """
    states = []
    n_lines = grid.lines_per_axis
    for i in range(count):
        heading = Heading(int(rng.integers(1, 5)))
        line = (int(rng.integers(0, n_lines)) - n_lines // 2) * grid.street_spacing
        along = float(rng.uniform(-grid.extent, grid.extent))
        pos = (along, line) if heading.horizontal else (line, along)
        states.append(VehicleState(first_id + i, pos, heading, float(speed)))
    return states


@dataclass(frozen=True)
class TrajectoryTable:
    """Positions of each node at slots ``1..horizon``.

    ``positions[i, t - 1]`` is the position of ``node_ids[i]`` at slot ``t``.
    """

    node_ids: tuple[int, ...]
    positions: np.ndarray

    @property
    def horizon(self) -> int:
        return self.positions.shape[1]

    def position(self, node_id: int, slot: int) -> tuple[float, float]:
        i = self.node_ids.index(node_id)
        x, y = self.positions[i, slot - 1]
        return float(x), float(y)

    def to_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "slot", "x", "y"])
        for i, nid in enumerate(self.node_ids):
            for t in range(self.horizon):
                x, y = self.positions[i, t]
                w.writerow([nid, t + 1, repr(float(x)), repr(float(y))])


def predict_trajectories(
    states: Iterable[VehicleState],
    grid: GridMap,
    params: MobilityParams,
    horizon: int,
    rng,
) -> TrajectoryTable:
    """Roll every vehicle forward ``horizon`` slots.

    Nodes are advanced one after another, each for the full horizon, so the
    table depends only on the order of ``states`` and the state of ``rng``.
    """
    states = list(states)
    out = np.empty((len(states), horizon, 2))
    for i, s in enumerate(states):
        for t in range(horizon):
            s = advance(s, grid, params, rng)
            out[i, t] = s.position
    return TrajectoryTable(tuple(s.node_id for s in states), out)
