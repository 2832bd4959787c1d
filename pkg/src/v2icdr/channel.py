"""Block-fading channel between the static node and the vehicles.

Every link gain is reciprocal and constant within a slot, independent
across slots.  Links longer than the disk radius have zero gain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Sequence, TextIO

import numpy as np

from .mobility import TrajectoryTable

SN = 0  # node id of the static node


class LinkInfeasibleError(ValueError):
    """An aimed link has zero gain and cannot be power controlled."""


@dataclass(frozen=True)
class ChannelModel:
    path_loss_exponent: float = 3.0
    reference_distance: float = 1.0
    rayleigh_fading: bool = True
    disk_radius: float = 65.0
    noise_power: float = 1.0
    received_power: float = 10.0

    def __post_init__(self):
        for name in ("path_loss_exponent", "reference_distance", "disk_radius",
                     "noise_power", "received_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def gamma_o(self) -> float:
        return self.received_power / self.noise_power

    def with_gamma_o(self, gamma_o: float) -> "ChannelModel":
        return replace(self, received_power=gamma_o * self.noise_power)


@dataclass(frozen=True)
class LinkGain:
    h: complex

    @property
    def power(self) -> float:
        return abs(self.h) ** 2


def path_gain(d, model: ChannelModel):
    """Mean power gain at distance ``d`` (scalar or array)."""
    d = np.maximum(d, model.reference_distance)
    return (d / model.reference_distance) ** (-model.path_loss_exponent)


def draw_gain(pos_a, pos_b, model: ChannelModel, rng) -> LinkGain:
    d = math.hypot(pos_a[0] - pos_b[0], pos_a[1] - pos_b[1])
    g = float(path_gain(d, model))
    if model.rayleigh_fading:
        g *= rng.exponential()
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return LinkGain(math.sqrt(g) * complex(math.cos(phase), math.sin(phase)))


def is_connected(pos_a, pos_b, radius: float) -> bool:
    return math.hypot(pos_a[0] - pos_b[0], pos_a[1] - pos_b[1]) <= radius


def controlled_tx_power(gain: float, received_power: float) -> float:
    """Transmit power that delivers ``received_power`` over a link of ``gain``."""
    if gain <= 0:
        raise LinkInfeasibleError("cannot power-control a link with zero gain")
    return received_power / gain


@dataclass(frozen=True)
class ChannelRealization:
    """Complex gains ``h[t - 1, a, b]`` between nodes ``a`` and ``b`` at slot ``t``.

    Node 0 is the static node; nodes ``1..N`` are the vehicles in the order of
    the trajectory table.  ``positions[t - 1, a]`` holds the matching node
    positions, the static node included.
    """

    h: np.ndarray
    positions: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.h.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.h.shape[1]

    def coeff(self, a: int, b: int, slot: int) -> complex:
        return complex(self.h[slot - 1, a, b])

    def gain(self, a: int, b: int, slot: int) -> float:
        return abs(self.h[slot - 1, a, b]) ** 2

    def link(self, a: int, b: int, slot: int) -> LinkGain:
        return LinkGain(self.coeff(a, b, slot))

    def distance(self, a: int, b: int, slot: int) -> float:
        p = self.positions[slot - 1]
        return float(math.hypot(*(p[a] - p[b])))

    def scaled(self, c: float) -> "ChannelRealization":
        """Same realization with every power gain multiplied by ``c``."""
        return ChannelRealization(self.h * math.sqrt(c), self.positions)

    def to_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "node_a", "node_b", "re(h)", "im(h)"])
        n = self.n_nodes
        for t in range(self.n_slots):
            for a in range(n):
                for b in range(a + 1, n):
                    v = self.h[t, a, b]
                    w.writerow([t + 1, a, b, repr(float(v.real)), repr(float(v.imag))])


def node_positions(traj: TrajectoryTable, sn_position: Sequence[float] = (0.0, 0.0)):
    """Stack the static node in front of the vehicles: shape ``(T, N + 1, 2)``."""
    t = traj.horizon
    sn = np.broadcast_to(np.asarray(sn_position, dtype=float), (t, 1, 2))
    return np.concatenate([sn, traj.positions.transpose(1, 0, 2)], axis=1)


def realize_channels(
    traj: TrajectoryTable,
    model: ChannelModel,
    rng,
    sn_position: Sequence[float] = (0.0, 0.0),
) -> ChannelRealization:
    pos = node_positions(traj, sn_position)
    n_slots, n_nodes, _ = pos.shape
    iu, ju = np.triu_indices(n_nodes, k=1)
    d = np.hypot(*(pos[:, iu] - pos[:, ju]).transpose(2, 0, 1))
    g = path_gain(d, model)
    if model.rayleigh_fading:
        g = g * rng.exponential(size=g.shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=g.shape)
    g = np.where(d <= model.disk_radius, g, 0.0)
    h = np.zeros((n_slots, n_nodes, n_nodes), dtype=complex)
    vals = np.sqrt(g) * np.exp(1j * phase)
    h[:, iu, ju] = vals
    h[:, ju, iu] = vals
    return ChannelRealization(h, pos)
