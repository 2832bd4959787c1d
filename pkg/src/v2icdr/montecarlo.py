"""Monte Carlo trials, parameter sweeps and aggregation."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy import stats

from .channel import ChannelModel, realize_channels
from .config import ExperimentConfig
from .mobility import GridMap, MobilityParams, place_vehicles, predict_trajectories
from .scheduler import Scenario, combine_multi_flow, optimize_single_flow
from .schemes import Direction, RelayMode

SWEEP_AXES = {"snr": "gamma_o_db", "po": "go_straight_prob"}
CSV_COLUMNS = ["sweep_param_name", "sweep_value", "scheme", "relay_mode",
               "mean_sum_rate", "stderr", "ci95_lo", "ci95_hi", "mean_nt", "trials"]

_COUNTER_BITS = 32


def seed_schedule(master_seed: int, point_index: int, trial_index: int) -> int:
    """Seed of one trial: ``master << 64 | point << 32 | trial``.

    Packing the three counters into disjoint bit fields makes the map
    injective; :func:`numpy.random.default_rng` then expands the integer
    through ``SeedSequence`` so neighbouring counters give unrelated streams.
    """
    limit = 1 << _COUNTER_BITS
    if not (0 <= point_index < limit and 0 <= trial_index < limit):
        raise ValueError("point and trial indices must fit in 32 bits")
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    return (master_seed << (2 * _COUNTER_BITS)) | (point_index << _COUNTER_BITS) | trial_index


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def channel_model(cfg: ExperimentConfig, gamma_o_db: float | None = None) -> ChannelModel:
    g = db_to_linear(cfg.gamma_o_db if gamma_o_db is None else gamma_o_db)
    return ChannelModel(
        path_loss_exponent=cfg.path_loss_exponent,
        reference_distance=cfg.reference_distance,
        rayleigh_fading=cfg.rayleigh_fading,
        disk_radius=cfg.disk_radius,
        noise_power=cfg.noise_power,
        received_power=g * cfg.noise_power,
    )


def build_realization(seed: int, cfg: ExperimentConfig, go_straight_prob: float):
    """Trajectories, traffic directions and channels of one trial.

    The random stream is consumed in that order (placement first), so
    everything is fixed by ``seed``; ``gamma_o`` plays no part.
    """
    rng = np.random.default_rng(seed)
    grid = GridMap(cfg.street_spacing, cfg.map_extent)
    states = place_vehicles(cfg.n_users + cfg.n_background, grid, cfg.speed, rng)
    traj = predict_trajectories(states, grid, MobilityParams(go_straight_prob),
                                2 * cfg.n_users, rng)
    directions = tuple(Direction.UPLINK if b else Direction.DOWNLINK
                       for b in rng.integers(0, 2, size=cfg.n_users))
    chan = realize_channels(traj, channel_model(cfg), rng)
    return traj, directions, chan


def build_scenario(seed: int, cfg: ExperimentConfig, go_straight_prob: float) -> Scenario:
    _, directions, chan = build_realization(seed, cfg, go_straight_prob)
    return Scenario(chan, directions, channel_model(cfg), beta=cfg.beta)


@dataclass(frozen=True)
class TrialRecord:
    gamma_o_db: float
    go_straight_prob: float
    relay_mode: str
    scheme: str
    sum_rate: float
    n_t: int
    energy: float
    user_modes: tuple


@dataclass(frozen=True)
class TrialResult:
    seed: int
    records: tuple

    def get(self, scheme: str, relay_mode: str = "AF", gamma_o_db: float | None = None):
        for r in self.records:
            if (r.scheme == scheme and r.relay_mode == relay_mode
                    and (gamma_o_db is None or r.gamma_o_db == gamma_o_db)):
                return r
        raise KeyError((scheme, relay_mode, gamma_o_db))


def run_trial(seed: int, cfg: ExperimentConfig, go_straight_prob: float | None = None,
              gamma_o_db_values: Sequence[float] | None = None) -> TrialResult:
    """One realization evaluated at every ``gamma_o`` and relay mode.

    ``go_straight_prob`` defaults to ``cfg.go_straight_prob`` and
    ``gamma_o_db_values`` to ``[cfg.gamma_o_db]``.  All the ``gamma_o``
    values share the same topology and fading.
    """
    p_o = cfg.go_straight_prob if go_straight_prob is None else go_straight_prob
    gammas = [cfg.gamma_o_db] if gamma_o_db_values is None else list(gamma_o_db_values)
    base = build_scenario(seed, cfg, p_o)
    want_single = cfg.scheduler_mode in ("single_flow", "both")
    want_multi = cfg.scheduler_mode in ("multi_flow", "both")
    records = []
    for g_db in gammas:
        sc = base.with_gamma_o(db_to_linear(g_db))
        for mode in cfg.relay_modes:
            single = optimize_single_flow(sc, RelayMode(mode), cap=cfg.user_cap,
                                          allow_large=cfg.allow_large_n)
            chosen = []
            if want_single:
                chosen.append(("single_flow", single))
            if want_multi:
                chosen.append(("multi_flow", combine_multi_flow(single, sc, RelayMode(mode))))
            for name, s in chosen:
                m = s.metrics
                records.append(TrialRecord(
                    float(g_db), float(p_o), mode, name, m.sum_rate, m.n_t, m.energy,
                    tuple(s.user_modes().items())))
    return TrialResult(seed, tuple(records))


@dataclass(frozen=True)
class AggregateRow:
    sweep_param_name: str
    sweep_value: float
    scheme: str
    relay_mode: str
    mean_sum_rate: float
    stderr: float
    ci95_lo: float
    ci95_hi: float
    mean_nt: float
    trials: int


def aggregate(values: Sequence[float]) -> tuple[float, float, float, float]:
    """Mean, standard error and Student-t 95% interval of ``values``."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    mean = min(max(math.fsum(x) / n, float(x.min())), float(x.max()))
    if n < 2:
        return mean, 0.0, mean, mean
    se = float(np.std(x, ddof=1)) / math.sqrt(n)
    half = float(stats.t.ppf(0.975, n - 1)) * se
    return mean, se, mean - half, mean + half


def _run_task(task):
    seed, cfg, p_o, gammas = task
    return run_trial(seed, cfg, p_o, gammas)


def _sweep_points(cfg: ExperimentConfig, axis: str):
    if axis == "gamma_o_db":
        return [cfg.go_straight_prob], list(cfg.gamma_o_db_values)
    if axis == "go_straight_prob":
        return list(cfg.go_straight_prob_values), [cfg.gamma_o_db]
    raise ValueError(f"unknown sweep axis {axis!r}")


def sweep(cfg: ExperimentConfig, axis: str = "gamma_o_db", workers: int = 1,
          progress=None) -> list[AggregateRow]:
    """Sweep one axis, ``trials`` trials per point, and aggregate.

    Trial seeds come from :func:`seed_schedule` with the index of the
    go-straight value as point index, so points on the ``gamma_o`` axis
    reuse the same realizations.  Results do not depend on ``workers``.
    """
    p_values, g_values = _sweep_points(cfg, axis)
    tasks = [(seed_schedule(cfg.master_seed, pi, ti), cfg, p, g_values)
             for pi, p in enumerate(p_values) for ti in range(cfg.trials)]
    if workers <= 1:
        results = map(_run_task, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers)))
    groups: dict[tuple, list] = {}
    try:
        for res in results:
            for r in res.records:
                groups.setdefault((r.go_straight_prob, r.gamma_o_db, r.scheme, r.relay_mode),
                                  []).append(r)
            if progress is not None:
                progress()
    finally:
        if workers > 1:
            pool.shutdown()

    schemes = [s for s in ("single_flow", "multi_flow")
               if cfg.scheduler_mode in (s, "both")]
    rows = []
    for p in p_values:
        for g in g_values:
            value = g if axis == "gamma_o_db" else p
            for scheme in schemes:
                for mode in cfg.relay_modes:
                    recs = groups[(float(p), float(g), scheme, mode)]
                    mean, se, lo, hi = aggregate([r.sum_rate for r in recs])
                    mean_nt = math.fsum(r.n_t for r in recs) / len(recs)
                    rows.append(AggregateRow(axis, float(value), scheme, mode,
                                             mean, se, lo, hi, mean_nt, len(recs)))
    return rows


def write_sweep_csv(rows: Iterable[AggregateRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.sweep_param_name, repr(r.sweep_value), r.scheme, r.relay_mode,
                    repr(r.mean_sum_rate), repr(r.stderr), repr(r.ci95_lo),
                    repr(r.ci95_hi), repr(r.mean_nt), r.trials])


def plot_sweep(rows: Sequence[AggregateRow], path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r.scheme, r.relay_mode) for r in rows})
    for scheme, mode in keys:
        sel = [r for r in rows if r.scheme == scheme and r.relay_mode == mode]
        x = [r.sweep_value * (100 if r.sweep_param_name == "go_straight_prob" else 1)
             for r in sel]
        ax.errorbar(x, [r.mean_sum_rate for r in sel],
                    yerr=[r.mean_sum_rate - r.ci95_lo for r in sel],
                    marker="o", capsize=3, label=f"{scheme} {mode}")
    axis = rows[0].sweep_param_name if rows else ""
    ax.set_xlabel("P / sigma^2 (dB)" if axis == "gamma_o_db" else "go-straight ratio p_o (%)")
    ax.set_ylabel("sum rate (bits/s/Hz per slot)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
