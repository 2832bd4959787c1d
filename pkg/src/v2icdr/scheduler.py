"""Slot scheduling: permutation search for single-flow, CDR combination for multi-flow.

A scheme of ``n`` users spans ``2n`` slot positions.  Nominal slots
``2i - 1`` and ``2i`` belong to user ``i``; a permutation assigns nominal
slots to positions, and the positions a user ends up with decide whether it
is served directly (one position) or through a relay (both positions).

Node ids: 0 is the static node (SN), ``1..n`` are the users, higher ids are
background vehicles that only act as relays.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Sequence, TextIO, Union

import numpy as np

from .channel import SN, ChannelModel, ChannelRealization
from .schemes import (
    SCHEME_FUNCS,
    Direction,
    RelayMode,
    SchemeInput,
    af_relay_e2e_snr,
    capacity,
    scheme_id,
)

DEFAULT_USER_CAP = 5


class CapExceededError(ValueError):
    """Refusal to run the factorial permutation search for too many users."""


def check_user_cap(n: int, cap: int = DEFAULT_USER_CAP, allow_large: bool = False) -> None:
    if n < 1:
        raise ValueError("need at least one user")
    if n > cap and not allow_large:
        raise CapExceededError(
            f"n = {n} users exceeds the cap of {cap}: the exhaustive permutation "
            f"search is factorial ((2n)! = {math.factorial(2 * n)} orderings); "
            "set allow_large_n / pass --no-cap to override"
        )


def enumerate_valid_permutations(
    n: int, cap: int = DEFAULT_USER_CAP, allow_large: bool = False
) -> Iterator[tuple[int, ...]]:
    """Yield, in lexicographic order, every ordering of slots ``1..2n`` in
    which slot ``2i - 1`` precedes slot ``2i`` for every user ``i``."""
    check_user_cap(n, cap, allow_large)
    m = 2 * n
    used = [False] * (m + 1)
    prefix: list[int] = []

    def rec():
        if len(prefix) == m:
            yield tuple(prefix)
            return
        for s in range(1, m + 1):
            if used[s] or (s % 2 == 0 and not used[s - 1]):
                continue
            used[s] = True
            prefix.append(s)
            yield from rec()
            prefix.pop()
            used[s] = False

    yield from rec()


# ---------------------------------------------------------------------------
# Schedule data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Direct:
    user: int
    position: int


@dataclass(frozen=True)
class Relayed:
    user: int
    relay: int
    hop1: int
    hop2: int


@dataclass(frozen=True)
class Outage:
    """Relayed user without any feasible relay.

    It keeps both positions (they count towards ``n_T``) but gets rate 0.
    """

    user: int
    positions: tuple[int, int]


@dataclass(frozen=True)
class CdrPair:
    relayed_user: int
    direct_user: int
    relay: int
    scheme: str
    hop1: int
    hop2: int

    @property
    def simultaneous_hop(self) -> int:
        # relayed-downlink schemes share the second hop, relayed-uplink the first
        return 2 if self.scheme in ("main", "s3") else 1

    @property
    def simultaneous(self) -> int:
        return self.hop2 if self.simultaneous_hop == 2 else self.hop1

    @property
    def single(self) -> int:
        return self.hop1 if self.simultaneous_hop == 2 else self.hop2


Service = Union[Direct, Relayed, Outage, CdrPair]


class SlotKind(str, Enum):
    EMPTY = "empty"
    DIRECT = "direct"
    HOP1 = "hop1"
    HOP2 = "hop2"
    CDR_SIMULTANEOUS = "cdr_simultaneous"
    CDR_SINGLE = "cdr_single"


@dataclass(frozen=True)
class SlotAssignment:
    position: int
    kind: SlotKind
    user: int | None = None
    relay: int | None = None
    paired_user: int | None = None
    scheme: str | None = None
    hop: int | None = None


@dataclass(frozen=True)
class ScheduleMetrics:
    sum_rate: float
    n_t: int
    energy: float
    user_snr: dict = field(compare=False)
    user_rate: dict = field(compare=False)


@dataclass(frozen=True)
class Schedule:
    n_positions: int
    services: tuple
    permutation: tuple | None = None
    metrics: ScheduleMetrics | None = None

    def occupied(self) -> set[int]:
        out: set[int] = set()
        for s in self.services:
            if isinstance(s, Direct):
                out.add(s.position)
            elif isinstance(s, (Relayed, CdrPair)):
                out.update((s.hop1, s.hop2))
            else:
                out.update(s.positions)
        return out

    @property
    def n_t(self) -> int:
        return len(self.occupied())

    @property
    def n_relayed(self) -> int:
        """Two-hop users, CDR-combined and outage ones included."""
        return sum(not isinstance(s, Direct) for s in self.services)

    @property
    def n_direct(self) -> int:
        return sum(1 if isinstance(s, Direct) else isinstance(s, CdrPair)
                   for s in self.services)

    def user_modes(self) -> dict[int, str]:
        modes = {}
        for s in self.services:
            if isinstance(s, Direct):
                modes[s.user] = f"direct@{s.position}"
            elif isinstance(s, Relayed):
                modes[s.user] = f"relay{s.relay}@{s.hop1},{s.hop2}"
            elif isinstance(s, Outage):
                modes[s.user] = "outage"
            else:
                modes[s.relayed_user] = f"cdr-relay{s.relay}@{s.hop1},{s.hop2}"
                modes[s.direct_user] = f"cdr-direct@{s.simultaneous}"
        return dict(sorted(modes.items()))

    def slots(self) -> list[SlotAssignment]:
        table = {p: SlotAssignment(p, SlotKind.EMPTY) for p in range(1, self.n_positions + 1)}
        for s in self.services:
            if isinstance(s, Direct):
                table[s.position] = SlotAssignment(s.position, SlotKind.DIRECT, s.user)
            elif isinstance(s, Relayed):
                table[s.hop1] = SlotAssignment(s.hop1, SlotKind.HOP1, s.user, s.relay, hop=1)
                table[s.hop2] = SlotAssignment(s.hop2, SlotKind.HOP2, s.user, s.relay, hop=2)
            elif isinstance(s, Outage):
                p1, p2 = s.positions
                table[p1] = SlotAssignment(p1, SlotKind.HOP1, s.user, hop=1)
                table[p2] = SlotAssignment(p2, SlotKind.HOP2, s.user, hop=2)
            elif isinstance(s, CdrPair):
                table[s.simultaneous] = SlotAssignment(
                    s.simultaneous, SlotKind.CDR_SIMULTANEOUS, s.direct_user, s.relay,
                    s.relayed_user, s.scheme, s.simultaneous_hop)
                table[s.single] = SlotAssignment(
                    s.single, SlotKind.CDR_SINGLE, s.relayed_user, s.relay,
                    s.direct_user, s.scheme, 3 - s.simultaneous_hop)
        return [table[p] for p in sorted(table)]


# ---------------------------------------------------------------------------
# Scenario: everything the scheduler needs about one realization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """Positions, channel gains and traffic directions of one realization.

    ``chan`` covers nodes ``0..N`` (SN, users, background vehicles) over at
    least ``2 * n_users`` slots.  ``beta`` is the power factor of the direct
    user's repeat in the relayed-uplink + direct-uplink scheme.
    """

    chan: ChannelRealization
    directions: tuple
    model: ChannelModel
    beta: float = 1.0
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "directions",
                           tuple(Direction(d) for d in self.directions))
        if self.chan.n_slots < 2 * self.n_users:
            raise ValueError("channel realization shorter than the scheme")
        if self.chan.n_nodes < self.n_users + 1:
            raise ValueError("channel realization lacks some users")

    @property
    def n_users(self) -> int:
        return len(self.directions)

    @property
    def n_positions(self) -> int:
        return 2 * self.n_users

    @property
    def radius(self) -> float:
        return self.model.disk_radius

    def direction(self, user: int) -> Direction:
        return self.directions[user - 1]

    def dist(self, a: int, b: int, t: int) -> float:
        return self.chan.distance(a, b, t)

    def connected(self, a: int, b: int, t: int) -> bool:
        return self.chan.distance(a, b, t) <= self.radius and self.chan.gain(a, b, t) > 0

    def with_gamma_o(self, gamma_o: float) -> "Scenario":
        # selection results do not depend on gamma_o, so the cache is shared
        return replace(self, model=self.model.with_gamma_o(gamma_o), cache=self.cache)


def _hop_links(direction: Direction, user: int, relay: int):
    if direction is Direction.DOWNLINK:
        return (SN, relay), (relay, user)
    return (user, relay), (relay, SN)


def select_relay(scenario: Scenario, user: int, t1: int, t2: int,
                 exclude: Sequence[int] = ()) -> int | None:
    """Best relay for ``user`` with hops at positions ``t1 < t2``.

    A candidate must reach the SN and the user on the hops that involve
    them; among those the one with the largest weaker-hop gain wins, lowest
    node id on ties.
    """
    direction = scenario.direction(user)
    gain = scenario.chan.gain
    best, best_score = None, -1.0
    for r in range(1, scenario.chan.n_nodes):
        if r == user or r in exclude:
            continue
        l1, l2 = _hop_links(direction, user, r)
        if not (scenario.connected(*l1, t1) and scenario.connected(*l2, t2)):
            continue
        score = min(gain(*l1, t1), gain(*l2, t2))
        if score > best_score:
            best, best_score = r, score
    return best


def _select_service(scenario: Scenario, user: int, pa: int, pb: int) -> Service:
    R = scenario.radius
    da, db = scenario.dist(user, SN, pa), scenario.dist(user, SN, pb)
    if da <= R and db <= R:
        return Direct(user, pa if da <= db else pb)
    if da <= R:
        return Direct(user, pa)
    if db <= R:
        return Direct(user, pb)
    relay = select_relay(scenario, user, pa, pb)
    if relay is None:
        return Outage(user, (pa, pb))
    return Relayed(user, relay, pa, pb)


def apply_slot_selection(perm: Sequence[int], scenario: Scenario) -> Schedule:
    """Turn one valid permutation into a single-flow schedule."""
    n = scenario.n_users
    if sorted(perm) != list(range(1, 2 * n + 1)):
        raise ValueError("permutation must cover nominal slots 1..2n")
    pos_of = {slot: p for p, slot in enumerate(perm, start=1)}
    services = []
    for user in range(1, n + 1):
        pa, pb = pos_of[2 * user - 1], pos_of[2 * user]
        if pa > pb:
            raise ValueError(f"invalid permutation: slot {2 * user} precedes {2 * user - 1}")
        services.append(_select_service(scenario, user, pa, pb))
    return Schedule(2 * n, tuple(services), tuple(perm))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def cdr_input(pair: CdrPair, scenario: Scenario) -> SchemeInput:
    """Gather the scheme coefficients of a CDR pair from the realization."""
    c = scenario.chan.coeff
    r, u, rho = pair.relayed_user, pair.direct_user, pair.relay
    t1, t2 = pair.hop1, pair.hop2
    m = scenario.model
    base = dict(gamma_o=m.gamma_o, noise_power=m.noise_power, beta=scenario.beta)
    if pair.scheme == "main":
        g = dict(h1=c(SN, rho, t1), h2p=c(rho, r, t2), h3p=c(u, SN, t2),
                 h4p=c(u, r, t2), h1p=c(rho, SN, t2))
    elif pair.scheme == "s2":
        g = dict(h2=c(r, rho, t1), h3=c(SN, u, t1), h4=c(r, u, t1), h1=c(SN, rho, t1),
                 h1p=c(rho, SN, t2), h5p=c(rho, u, t2))
    elif pair.scheme == "s3":
        g = dict(h1=c(SN, rho, t1), h3=c(SN, u, t1), h2p=c(rho, r, t2),
                 h3p=c(SN, u, t2), h5p=c(rho, u, t2))
    elif pair.scheme == "s4":
        g = dict(h2=c(r, rho, t1), h3=c(u, SN, t1), h5=c(u, rho, t1),
                 h1p=c(rho, SN, t2), h3p=c(u, SN, t2))
    else:
        raise ValueError(f"unknown scheme {pair.scheme!r}")
    return SchemeInput(**base, **g)


def relayed_snr(mode: RelayMode, gamma_o: float) -> float:
    return af_relay_e2e_snr(gamma_o) if RelayMode(mode) is RelayMode.AF else gamma_o


def evaluate(schedule: Schedule, scenario: Scenario, mode: RelayMode) -> ScheduleMetrics:
    """Per-user SNRs and rates, ``sum_rate = sum of rates / n_T``, and energy."""
    mode = RelayMode(mode)
    m = scenario.model
    gamma, P = m.gamma_o, m.received_power
    gain = scenario.chan.gain
    snr: dict[int, float] = {}
    energy = 0.0
    for s in schedule.services:
        if isinstance(s, Direct):
            snr[s.user] = gamma
            energy += P / gain(s.user, SN, s.position)
        elif isinstance(s, Relayed):
            snr[s.user] = relayed_snr(mode, gamma)
            (a1, b1), (a2, b2) = _hop_links(scenario.direction(s.user), s.user, s.relay)
            energy += P / gain(a1, b1, s.hop1) + P / gain(a2, b2, s.hop2)
        elif isinstance(s, Outage):
            snr[s.user] = 0.0
        else:
            out = SCHEME_FUNCS[(s.scheme, mode)](cdr_input(s, scenario))
            snr[s.relayed_user], snr[s.direct_user] = out.snr
            energy += out.energy
    snr = dict(sorted(snr.items()))
    rate = {u: capacity(v) for u, v in snr.items()}
    n_t = schedule.n_t
    total = math.fsum(rate.values())
    return ScheduleMetrics(total / n_t if n_t else 0.0, n_t, energy, snr, rate)


def _with_metrics(schedule: Schedule, scenario: Scenario, mode) -> Schedule:
    return replace(schedule, metrics=evaluate(schedule, scenario, mode))


# ---------------------------------------------------------------------------
# Single-flow optimisation
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def _permutation_tables(n: int):
    """All valid permutations and, per permutation and user, the index of the
    user's position pair in the list of all pairs ``p < q``."""
    m = 2 * n
    pairs = [(p, q) for p in range(1, m + 1) for q in range(p + 1, m + 1)]
    index = {pq: k for k, pq in enumerate(pairs)}
    perms = list(enumerate_valid_permutations(n, allow_large=True))
    table = np.empty((len(perms), n), dtype=np.int64)
    for k, perm in enumerate(perms):
        pos_of = {slot: p for p, slot in enumerate(perm, start=1)}
        for i in range(n):
            table[k, i] = index[(pos_of[2 * i + 1], pos_of[2 * i + 2])]
    return perms, pairs, table


def _service_counts(scenario: Scenario):
    """Number of direct, relayed and outage users of every valid permutation.

    Slot selection is independent of ``gamma_o`` and the relay mode, so the
    result is cached on the scenario.
    """
    if "counts" in scenario.cache:
        return scenario.cache["counts"]
    n = scenario.n_users
    perms, pairs, table = _permutation_tables(n)
    kind = np.zeros((n, len(pairs)), dtype=np.int8)
    for i in range(n):
        for k, (p, q) in enumerate(pairs):
            s = _select_service(scenario, i + 1, p, q)
            kind[i, k] = 1 if isinstance(s, Direct) else 2 if isinstance(s, Relayed) else 0
    per_perm = kind[np.arange(n), table]
    counts = (perms, (per_perm == 1).sum(axis=1), (per_perm == 2).sum(axis=1),
              (per_perm == 0).sum(axis=1))
    scenario.cache["counts"] = counts
    return counts


def optimize_single_flow(scenario: Scenario, mode: RelayMode, *,
                         cap: int = DEFAULT_USER_CAP, allow_large: bool = False,
                         vectorized: bool = True) -> Schedule:
    """Best single-flow schedule over all valid permutations.

    Ties go to the permutation enumerated first.  ``vectorized=False`` runs
    :func:`apply_slot_selection` and :func:`evaluate` on every permutation;
    the default path scores permutations from cached service counts, which
    is equivalent because single-flow per-user SNRs depend only on
    whether the user is direct, relayed or in outage.
    """
    check_user_cap(scenario.n_users, cap, allow_large)
    if not vectorized:
        best = None
        for perm in enumerate_valid_permutations(scenario.n_users, allow_large=True):
            cand = _with_metrics(apply_slot_selection(perm, scenario), scenario, mode)
            if best is None or cand.metrics.sum_rate > best.metrics.sum_rate:
                best = cand
        return best
    perms, n_dir, n_rel, n_out = _service_counts(scenario)
    gamma = scenario.model.gamma_o
    r_dir = capacity(gamma)
    r_rel = capacity(relayed_snr(mode, gamma))
    n_t = n_dir + 2 * (n_rel + n_out)
    total = n_dir * r_dir + n_rel * r_rel
    score = np.divide(total, n_t, out=np.zeros(len(perms)), where=n_t > 0)
    k = int(np.argmax(score))
    return _with_metrics(apply_slot_selection(perms[k], scenario), scenario, mode)


# ---------------------------------------------------------------------------
# Multi-flow combination
# ---------------------------------------------------------------------------

def cdr_placements(schedule: Schedule, r: Relayed, u: Direct,
                   scenario: Scenario) -> Iterator[Schedule]:
    """Every feasible way of merging relayed user ``r`` and direct user ``u``.

    The hop that does not share a slot keeps its position; the shared slot
    (direct transmission plus the other hop) moves over every position that
    is empty or freed by the merge, respecting hop order.  The direct user
    must be inside the disk there, the relayed user outside it, and the
    moved hop's link must be connected.
    """
    if r.relay == u.user:
        return
    sid = scheme_id(scenario.direction(r.user), scenario.direction(u.user))
    sim_is_hop2 = scenario.direction(r.user) is Direction.DOWNLINK
    single = r.hop1 if sim_is_hop2 else r.hop2
    moved = r.hop2 if sim_is_hop2 else r.hop1
    taken = schedule.occupied() - {u.position, moved}
    R = scenario.radius
    link = (r.relay, r.user) if sim_is_hop2 else (r.user, r.relay)
    rest = tuple(s for s in schedule.services if s is not r and s is not u)
    for q in range(1, schedule.n_positions + 1):
        if q in taken or (q <= single if sim_is_hop2 else q >= single):
            continue
        if scenario.dist(u.user, SN, q) > R or not scenario.chan.gain(u.user, SN, q) > 0:
            continue
        if scenario.dist(r.user, SN, q) <= R:
            continue
        if not scenario.connected(*link, q):
            continue
        hop1, hop2 = (single, q) if sim_is_hop2 else (q, single)
        pair = CdrPair(r.user, u.user, r.relay, sid, hop1, hop2)
        services = tuple(sorted(rest + (pair,), key=_service_user))
        yield Schedule(schedule.n_positions, services, schedule.permutation)


def _service_user(s: Service) -> int:
    return s.relayed_user if isinstance(s, CdrPair) else s.user


def combine_multi_flow(single: Schedule, scenario: Scenario, mode: RelayMode) -> Schedule:
    """Greedily merge (relayed, direct) user pairs into CDR schemes.

    Relayed users are visited in descending single-flow rate (then id).  For
    each, the best placement over all available direct users is accepted
    only if it strictly raises the schedule's sum rate.  Passes repeat until
    nothing improves.
    """
    if single.metrics is None:
        single = _with_metrics(single, scenario, mode)
    base_rate = single.metrics.user_rate
    current = single
    changed = True
    while changed:
        changed = False
        relayed = sorted((s for s in current.services if isinstance(s, Relayed)),
                         key=lambda s: (-base_rate[s.user], s.user))
        for r in relayed:
            if r not in current.services:
                continue
            directs = [s for s in current.services if isinstance(s, Direct)]
            best = None
            for u in directs:
                for cand in cdr_placements(current, r, u, scenario):
                    m = evaluate(cand, scenario, mode)
                    if best is None or m.sum_rate > best.metrics.sum_rate:
                        best = replace(cand, metrics=m)
            if best is not None and best.metrics.sum_rate > current.metrics.sum_rate:
                current = best
                changed = True
    return current


# ---------------------------------------------------------------------------
# Inspection helpers
# ---------------------------------------------------------------------------

def slot_roles(schedule: Schedule, scenario: Scenario) -> dict[int, tuple[set, set]]:
    """Transmitters and receivers (overhearers included) at every position."""
    roles = {p: (set(), set()) for p in range(1, schedule.n_positions + 1)}

    def add(p, tx, rx):
        roles[p][0].add(tx)
        roles[p][1].add(rx)

    for s in schedule.services:
        if isinstance(s, Direct):
            if scenario.direction(s.user) is Direction.UPLINK:
                add(s.position, s.user, SN)
            else:
                add(s.position, SN, s.user)
        elif isinstance(s, Relayed):
            (a1, b1), (a2, b2) = _hop_links(scenario.direction(s.user), s.user, s.relay)
            add(s.hop1, a1, b1)
            add(s.hop2, a2, b2)
        elif isinstance(s, CdrPair):
            r, u, rho = s.relayed_user, s.direct_user, s.relay
            (a1, b1), (a2, b2) = _hop_links(scenario.direction(r), r, rho)
            add(s.hop1, a1, b1)
            add(s.hop2, a2, b2)
            if scenario.direction(u) is Direction.UPLINK:
                add(s.simultaneous, u, SN)
            else:
                add(s.simultaneous, SN, u)
            if s.scheme == "s3":
                roles[s.single][1].add(u)
            elif s.scheme == "s4":
                add(s.single, u, SN)
            elif s.scheme == "s2":
                roles[s.single][1].add(u)
    return roles


SCHEDULE_CSV_COLUMNS = ["position", "kind", "user", "relay", "paired_user", "snr_db", "rate"]


def _snr_db(v: float) -> str:
    return f"{10 * math.log10(v):.6f}" if v > 0 else "-inf"


def schedule_rows(schedule: Schedule) -> list[dict]:
    """One row per position; ``snr_db`` and ``rate`` belong to the row's user."""
    m = schedule.metrics
    rows = []
    for a in schedule.slots():
        row = {"position": a.position, "kind": a.kind.value,
               "user": "" if a.user is None else a.user,
               "relay": "" if a.relay is None else a.relay,
               "paired_user": "" if a.paired_user is None else a.paired_user,
               "snr_db": "", "rate": ""}
        if a.user is not None and m is not None:
            row["snr_db"] = _snr_db(m.user_snr[a.user])
            row["rate"] = f"{m.user_rate[a.user]:.6f}"
        rows.append(row)
    return rows


def write_schedule_csv(schedule: Schedule, fh: TextIO) -> None:
    w = csv.DictWriter(fh, fieldnames=SCHEDULE_CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(schedule_rows(schedule))


def format_schedule(schedule: Schedule, title: str = "") -> list[str]:
    """Fixed-width slot table, one line per position plus a summary line."""
    lines = [title] if title else []
    lines.append(f"{'pos':>3}  {'content':<26} {'snr_db':>9} {'rate':>7}")
    for row in schedule_rows(schedule):
        kind = row["kind"]
        if kind == "empty":
            content = "-"
        elif kind == "direct":
            content = f"U{row['user']} direct"
        elif kind in ("hop1", "hop2") and row["relay"] == "":
            content = f"U{row['user']} {kind} outage"
        elif kind in ("hop1", "hop2"):
            content = f"U{row['user']} {kind} via N{row['relay']}"
        elif kind == "cdr_simultaneous":
            content = f"U{row['user']}+U{row['paired_user']}(N{row['relay']}) cdr-sim"
        else:
            content = f"U{row['user']} cdr-single via N{row['relay']}"
        lines.append(f"{row['position']:>3}  {content:<26} {row['snr_db']:>9} {row['rate']:>7}")
    if schedule.metrics is not None:
        m = schedule.metrics
        lines.append(f"sum_rate={m.sum_rate:.6f} n_T={m.n_t} energy={m.energy:.6g}")
    return lines
