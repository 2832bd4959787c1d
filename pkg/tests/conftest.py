"""Shared helpers: hand-built and random scenarios."""

from __future__ import annotations

import numpy as np
import pytest

from v2icdr.channel import ChannelModel, ChannelRealization, path_gain, realize_channels
from v2icdr.mobility import GridMap, MobilityParams, place_vehicles, predict_trajectories
from v2icdr.scheduler import Scenario
from v2icdr.schemes import Direction

UL, DL = Direction.UPLINK, Direction.DOWNLINK


def static_channel(positions, model: ChannelModel) -> ChannelRealization:
    """Fading-free real gains from explicit positions ``[T, nodes, 2]``."""
    pos = np.asarray(positions, dtype=float)
    d = np.hypot(pos[:, :, None, 0] - pos[:, None, :, 0], pos[:, :, None, 1] - pos[:, None, :, 1])
    g = np.where(d <= model.disk_radius, path_gain(d, model), 0.0)
    n = pos.shape[1]
    g[:, np.arange(n), np.arange(n)] = 0.0
    return ChannelRealization(np.sqrt(g).astype(complex), pos)


def scenario_from_positions(positions, directions, model=None, beta=1.0) -> Scenario:
    model = model or ChannelModel(rayleigh_fading=False)
    return Scenario(static_channel(positions, model), tuple(directions), model, beta=beta)


def random_scenario(rng, n, model=None, n_background=0, directions=None, p_o=0.5) -> Scenario:
    model = model or ChannelModel()
    grid = GridMap()
    states = place_vehicles(n + n_background, grid, 10.0, rng)
    traj = predict_trajectories(states, grid, MobilityParams(p_o), 2 * n, rng)
    if directions is None:
        directions = tuple(UL if b else DL for b in rng.integers(0, 2, size=n))
    return Scenario(realize_channels(traj, model, rng), tuple(directions), model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
