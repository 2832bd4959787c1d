"""Quick invariant checks run by ``v2icdr selftest``.

Each check compares the library against an independent reference from
:mod:`v2icdr.oracles` (or an exact invariant) on a small random sample.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import oracles
from .channel import ChannelModel, realize_channels
from .mobility import (STREET_TOL, GridMap, MobilityParams, advance, place_vehicles,
                       predict_trajectories)
from .scheduler import (Scenario, combine_multi_flow, enumerate_valid_permutations,
                        optimize_single_flow)
from .schemes import (AIMED_LINKS, SCHEME_FUNCS, Direction, RelayMode, SchemeInput,
                      cdr_main_af, cdr_main_df, mmse_sinr_two_obs, noncdr_rates)


def _close(a, b, rel):
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel * 1e-3)


def _cgauss(rng):
    return complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2)


def check_main_formulas(rng) -> str | None:
    for _ in range(200):
        g = 10 ** rng.uniform(-1, 3)
        h = {k: _cgauss(rng) for k in ("h1", "h1p", "h2p", "h3p", "h4p")}
        inp = SchemeInput(gamma_o=g, **h)
        r43 = abs(h["h4p"]) ** 2 / abs(h["h3p"]) ** 2
        r12 = abs(h["h1p"]) ** 2 / abs(h["h2p"]) ** 2
        for func, forms, df in ((cdr_main_af, oracles.af_main_closed_forms(g, r43, r12), False),
                                (cdr_main_df, oracles.df_main_closed_forms(g, r43), True)):
            out = func(inp)
            for key, want in forms.items():
                if not _close(out.breakdown[key], want, 1e-12):
                    return f"{func.__name__} {key}: {out.breakdown[key]!r} != {want!r}"
            ref = oracles.main_rates(forms, df)
            got = [tuple(map(oracles.log2p1, o)) for o in out.option_snrs]
            for (a, b), (c, d) in zip(got, ref):
                if not (_close(a, c, 1e-12) and _close(b, d, 1e-12)):
                    return f"{func.__name__} option rates differ"
    return None


def check_mmse(rng) -> str | None:
    for _ in range(1000):
        H = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        xi = 1.0 + rng.exponential()
        s2 = 10 ** rng.uniform(-1, 1)
        for target in (1, 2):
            for cancel in (False, True):
                got = mmse_sinr_two_obs(H, xi, s2, target, cancel)
                want = oracles.mmse_sinr_bruteforce(H, xi, s2, target, cancel)
                if not _close(got, want, 1e-9):
                    return f"MMSE mismatch {got!r} vs {want!r}"
    return None


def check_decoupling(rng) -> str | None:
    for (sid, mode), func in SCHEME_FUNCS.items():
        for _ in range(20):
            g = 10 ** rng.uniform(-1, 3)
            gains = {k: _cgauss(rng) for k in AIMED_LINKS[sid]}
            out = func(SchemeInput(gamma_o=g, beta=0.0, **gains))
            ref = noncdr_rates(mode, g)
            if out.slots_used != 2 or ref.slots_used != 3:
                return f"{sid}-{mode.value}: slot counts"
            for a, b in zip(out.snr, ref.snr):
                if not _close(a, b, 1e-12):
                    return f"{sid}-{mode.value}: {out.snr} != {ref.snr}"
    return None


def check_permutation_counts(rng) -> str | None:
    for n, want in ((1, 1), (2, 6), (3, 90), (4, 2520)):
        got = sum(1 for _ in enumerate_valid_permutations(n))
        if got != want:
            return f"n={n}: {got} permutations, expected {want}"
    return None


def _random_scenario(rng, n, model, directions=None):
    grid = GridMap()
    states = place_vehicles(n, grid, 10.0, rng)
    traj = predict_trajectories(states, grid, MobilityParams(0.5), 2 * n, rng)
    if directions is None:
        directions = tuple(Direction.UPLINK if b else Direction.DOWNLINK
                           for b in rng.integers(0, 2, size=n))
    chan = realize_channels(traj, model, rng)
    return Scenario(chan, tuple(Direction(d) for d in directions), model)


def check_scheduler_oracle(rng) -> str | None:
    model = ChannelModel()
    for _ in range(30):
        sc = _random_scenario(rng, 2, model)
        dirs = [d.value for d in sc.directions]
        for mode in RelayMode:
            got = optimize_single_flow(sc, mode).metrics.sum_rate
            want = oracles.brute_force_single_flow(
                sc.chan.positions, sc.chan.h, dirs, model.disk_radius,
                model.gamma_o, mode is RelayMode.AF)
            if not _close(got, want, 1e-12):
                return f"single-flow {got!r} vs brute force {want!r}"
    return None


def check_multi_flow(rng) -> str | None:
    model = ChannelModel()
    for _ in range(30):
        sc = _random_scenario(rng, 4, model)
        for mode in RelayMode:
            single = optimize_single_flow(sc, mode)
            multi = combine_multi_flow(single, sc, mode)
            if multi.metrics.sum_rate < single.metrics.sum_rate:
                return "multi-flow below single-flow"
    return None


def check_mobility(rng) -> str | None:
    grid = GridMap()
    params = MobilityParams(0.5)
    for st in place_vehicles(20, grid, 10.0, rng):
        for _ in range(100):
            nxt = advance(st, grid, params, rng)
            if not grid.on_street(nxt.position):
                return f"vehicle left the streets at {nxt.position}"
            # wrapped displacement along the streets equals v exactly per slot
            step = np.abs(np.asarray(nxt.position) - np.asarray(st.position))
            step = np.minimum(step, grid.period - step)
            # a turn gives an L-shaped path, whose Manhattan length is still v
            if abs(step.sum() - st.speed) > STREET_TOL:
                return f"per-slot path length {step.sum()} != {st.speed}"
            st = nxt
    return None


CHECKS: dict[str, Callable] = {
    "main-scheme closed forms": check_main_formulas,
    "MMSE vs covariance inversion": check_mmse,
    "decoupling (all schemes)": check_decoupling,
    "valid permutation counts": check_permutation_counts,
    "single-flow vs brute force (n=2)": check_scheduler_oracle,
    "multi-flow >= single-flow": check_multi_flow,
    "street adherence / path length": check_mobility,
}


def run(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    ok = True
    for name, check in CHECKS.items():
        try:
            err = check(rng)
        except Exception as exc:  # a crash is a failed invariant too
            err = f"{type(exc).__name__}: {exc}"
        out(f"{'PASS' if err is None else 'FAIL'}  {name}" + ("" if err is None else f"  ({err})"))
        ok = ok and err is None
    return ok


__all__ = ["CHECKS", "run"]
