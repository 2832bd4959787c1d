"""Achievable rates of the individual two-user transmission schemes.

Every scheme involves one relayed user (user 1, served through a relay R)
and one direct user (user 2).  Transmit powers are controlled so that every
aimed receiver sees power ``P``; non-aimed (interference) links carry
whatever the aimed power control makes them carry.

Channel coefficients follow one naming convention throughout: ``h1 .. h5``
are slot-1 coefficients and ``h1p .. h5p`` are slot-2 coefficients.  Their
meaning differs between schemes and is documented on each scheme function.

All schemes return a :class:`SchemeOutcome` built from the decoding options
the scheme offers; the option with the larger sum rate is kept (option 1 on
ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum

import numpy as np

from .channel import LinkInfeasibleError


class Direction(str, Enum):
    UPLINK = "UL"
    DOWNLINK = "DL"


class RelayMode(str, Enum):
    AF = "AF"
    DF = "DF"


def capacity(snr):
    """Shannon capacity ``log2(1 + snr)`` in bits/s/Hz."""
    a = np.asarray(snr, dtype=float)
    if np.any(a < 0):
        raise ValueError("SNR must be non-negative")
    out = np.log2(1.0 + a)
    return float(out) if out.ndim == 0 else out


def af_relay_e2e_snr(gamma_o: float) -> float:
    """End-to-end SNR of a power-controlled two-hop AF link."""
    return gamma_o * gamma_o / (2.0 * gamma_o + 1.0)


@dataclass(frozen=True)
class SchemeInput:
    """Channel coefficients and power settings fed to a scheme."""

    gamma_o: float
    noise_power: float = 1.0
    beta: float = 1.0
    h1: complex = 0j
    h2: complex = 0j
    h3: complex = 0j
    h4: complex = 0j
    h5: complex = 0j
    h1p: complex = 0j
    h2p: complex = 0j
    h3p: complex = 0j
    h4p: complex = 0j
    h5p: complex = 0j

    def __post_init__(self):
        if not self.gamma_o >= 0:
            raise ValueError("gamma_o must be non-negative")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")

    @property
    def P(self) -> float:
        return self.gamma_o * self.noise_power

    def g(self, name: str) -> float:
        return abs(getattr(self, name)) ** 2

    def scaled(self, c: float) -> "SchemeInput":
        """Multiply every power gain by ``c``."""
        k = math.sqrt(c)
        return replace(self, **{f.name: getattr(self, f.name) * k
                                for f in fields(self) if f.name.startswith("h")})


@dataclass(frozen=True)
class EffectiveMimoChannel:
    """Two observations of two symbols: ``y = H x + n``.

    The noise on the first observation has variance ``sigma^2`` and on the
    second ``xi * sigma^2``.
    """

    H: np.ndarray
    xi: float = 1.0

    def __post_init__(self):
        if not self.xi >= 1.0:
            raise ValueError("xi must be >= 1")


@dataclass(frozen=True)
class SchemeOutcome:
    """Result of evaluating one scheme.

    ``option_snrs[j]`` holds the effective SNR pair of decoding option
    ``j + 1``; the kept option's pair is ``snr`` and ``rates`` are their
    capacities.  ``energy`` is the sum of transmit powers over all
    transmissions (one slot each), or None when no gains were supplied.
    """

    rates: tuple[float, float]
    snr: tuple[float, float]
    option: int
    slots_used: int
    energy: float | None
    option_snrs: tuple[tuple[float, float], ...]
    breakdown: dict = field(default_factory=dict, compare=False)

    @property
    def sum_rate(self) -> float:
        return self.rates[0] + self.rates[1]

    def option_sum_rates(self) -> tuple[float, ...]:
        return tuple(capacity(a) + capacity(b) for a, b in self.option_snrs)


def _outcome(options, slots_used, energy, breakdown) -> SchemeOutcome:
    options = tuple((float(a), float(b)) for a, b in options)
    best, best_sum = 0, -1.0
    for j, (a, b) in enumerate(options):
        s = capacity(a) + capacity(b)
        if s > best_sum:
            best, best_sum = j, s
    snr = options[best]
    return SchemeOutcome(
        rates=(capacity(snr[0]), capacity(snr[1])),
        snr=snr,
        option=best + 1,
        slots_used=slots_used,
        energy=energy,
        option_snrs=options,
        breakdown=breakdown,
    )


def _aimed(inp: SchemeInput, *names: str) -> list[float]:
    gains = [inp.g(n) for n in names]
    for n, g in zip(names, gains):
        if g <= 0:
            raise LinkInfeasibleError(f"aimed link {n} has zero gain")
    return gains


def _unit(h: complex) -> complex:
    """Phase of ``h``; the power-control normalisation ``h / |h|``."""
    return h / abs(h) if h != 0 else 0j


def noncdr_rates(mode: RelayMode, gamma_o: float, aimed_gains=None,
                 noise_power: float = 1.0) -> SchemeOutcome:
    """Conventional three-slot scheme: two relay hops plus one direct slot.

    ``aimed_gains`` (the three aimed power gains) is only needed to report
    the transmit energy.
    """
    mode = RelayMode(mode)
    snr1 = af_relay_e2e_snr(gamma_o) if mode is RelayMode.AF else gamma_o
    energy = None
    if aimed_gains is not None:
        P = gamma_o * noise_power
        energy = 0.0
        for g in aimed_gains:
            if g <= 0:
                raise LinkInfeasibleError("aimed link has zero gain")
            energy += P / g
    return _outcome([(snr1, gamma_o)], 3, energy,
                    {"1SNR_1": snr1, "SSNR_2": gamma_o})


def mmse_sinr_two_obs(H, xi: float = 1.0, noise_power: float = 1.0,
                      target: int = 1, cancel_other: bool = False) -> float:
    """Linear-MMSE SINR of one symbol from two noisy observations.

    Parameters
    ----------
    H : (2, 2) array_like
        Column ``k - 1`` maps symbol ``x_k`` onto the two observations.
    xi : float
        Noise enhancement of the second observation.
    target : {1, 2}
        Symbol to decode.
    cancel_other : bool
        If True the other symbol is known and removed first, which leaves
        maximum-ratio combining of the target column.
    """
    if xi < 1:
        raise ValueError("xi must be >= 1")
    if target not in (1, 2):
        raise ValueError("target must be 1 or 2")
    H = np.asarray(H, dtype=complex)
    a = H[:, target - 1]
    b = H[:, 2 - target]
    # per-entry SNRs |H_ij|^2 / sigma^2, second observation divided by xi
    ga = (a.real**2 + a.imag**2) / noise_power
    s_aa = float(ga[0] + ga[1] / xi)
    if cancel_other:
        return s_aa
    gb = (b.real**2 + b.imag**2) / noise_power
    s_bb = float(gb[0] + gb[1] / xi)
    s_ab = complex((np.conj(a[0]) * b[0] + np.conj(a[1]) * b[1] / xi) / noise_power)
    return max(s_aa - abs(s_ab) ** 2 / (1.0 + s_bb), 0.0)


# ---------------------------------------------------------------------------
# Relayed downlink + direct uplink
# ---------------------------------------------------------------------------

def cdr_main_af(inp: SchemeInput) -> SchemeOutcome:
    """Relayed downlink combined with a direct uplink, AF relay.

    Slot 1: SN -> R (``h1``).  Slot 2: R -> user 1 (``h2p``) while user 2
    sends to the SN (``h3p``); ``h4p`` is user 2 -> user 1 and ``h1p`` is
    R -> SN.  The SN removes its own ``x1`` and is left with the forwarded
    relay noise.
    """
    g1, g2p, g3p = _aimed(inp, "h1", "h2p", "h3p")
    P, s2 = inp.P, inp.noise_power
    r43 = inp.g("h4p") / g3p
    r12 = inp.g("h1p") / g2p
    alpha = 1.0 / (P + s2)

    snr_1_o1 = alpha * P**2 / (r43 * P + alpha * P * s2 + s2)
    snr_2_at_1 = r43 * P / (alpha * P**2 + alpha * P * s2 + s2)
    snr_1_o2 = alpha * P**2 / (alpha * P * s2 + s2)
    snr_S_2 = P / (r12 * alpha * P * s2 + s2)

    options = [(snr_1_o1, snr_S_2), (snr_1_o2, min(snr_2_at_1, snr_S_2))]
    breakdown = {"alpha": alpha, "1SNR^1_1": snr_1_o1, "1SNR^2_2": snr_2_at_1,
                 "1SNR^2_1": snr_1_o2, "SSNR_2": snr_S_2}
    return _outcome(options, 2, P / g1 + P / g2p + P / g3p, breakdown)


def cdr_main_df(inp: SchemeInput) -> SchemeOutcome:
    """DF counterpart of :func:`cdr_main_af`; same coefficient roles."""
    g1, g2p, g3p = _aimed(inp, "h1", "h2p", "h3p")
    P, s2 = inp.P, inp.noise_power
    r43 = inp.g("h4p") / g3p
    snr_R_1 = P / s2

    snr_1_o1 = P / (r43 * P + s2)
    snr_2_at_1 = r43 * P / (P + s2)
    snr_1_o2 = P / s2
    snr_S_2 = P / s2

    options = [(min(snr_1_o1, snr_R_1), snr_S_2),
               (min(snr_1_o2, snr_R_1), min(snr_2_at_1, snr_S_2))]
    breakdown = {"RSNR_1": snr_R_1, "1SNR^1_1": snr_1_o1, "1SNR^2_2": snr_2_at_1,
                 "1SNR^2_1": snr_1_o2, "SSNR_2": snr_S_2}
    return _outcome(options, 2, P / g1 + P / g2p + P / g3p, breakdown)


# ---------------------------------------------------------------------------
# Relayed uplink + direct downlink
# ---------------------------------------------------------------------------

def _s2_channel(inp: SchemeInput, forward_gain: complex) -> np.ndarray:
    P = inp.P
    sp = math.sqrt(P)
    row1 = [inp.h4 * sp / abs(inp.h2), inp.h3 * sp / abs(inp.h3)]
    row2 = [forward_gain * _unit(inp.h2) * sp, forward_gain * inp.h1 * sp / abs(inp.h3)]
    return np.array([row1, row2], dtype=complex)


def _s2_options(inp, H, xi, snr_1_sn):
    s2 = inp.noise_power
    snr_2_1_o1 = mmse_sinr_two_obs(H, xi, s2, target=1)
    snr_2_2_o1 = mmse_sinr_two_obs(H, xi, s2, target=2, cancel_other=True)
    snr_2_2_o2 = mmse_sinr_two_obs(H, xi, s2, target=2)
    options = [(min(snr_1_sn, snr_2_1_o1), snr_2_2_o1), (snr_1_sn, snr_2_2_o2)]
    return options, {"2SNR^1_1": snr_2_1_o1, "2SNR^1_2": snr_2_2_o1,
                     "2SNR^2_2": snr_2_2_o2}


def cdr_s2_af(inp: SchemeInput) -> SchemeOutcome:
    """Relayed uplink combined with a direct downlink, AF relay.

    Slot 1: user 1 -> R (``h2``) while the SN sends to user 2 (``h3``);
    ``h4`` is user 1 -> user 2 and ``h1`` is SN -> R.  Slot 2: R -> SN
    (``h1p``), overheard by user 2 over ``h5p``.  User 2 decodes ``x2`` from
    both of its observations.
    """
    g2, g3, g1p = _aimed(inp, "h2", "h3", "h1p")
    P, s2 = inp.P, inp.noise_power
    alpha = 1.0 / (P + inp.g("h1") / g3 * P + s2)
    snr_S_1 = alpha * P**2 / (alpha * P * s2 + s2)
    xi = 1.0 + inp.g("h5p") / g1p * alpha * P
    H = _s2_channel(inp, inp.h5p * math.sqrt(alpha * P) / abs(inp.h1p))
    options, bd = _s2_options(inp, H, xi, snr_S_1)
    bd.update({"alpha": alpha, "xi": xi, "SSNR_1": snr_S_1})
    return _outcome(options, 2, P / g2 + P / g3 + P / g1p, bd)


def cdr_s2_df(inp: SchemeInput) -> SchemeOutcome:
    """DF counterpart of :func:`cdr_s2_af`.

    The relay decodes ``x1`` in slot 1 with ``x2`` as noise and resends it
    cleanly, so user 2's second observation carries ``x1`` only.
    """
    g2, g3, g1p = _aimed(inp, "h2", "h3", "h1p")
    P, s2 = inp.P, inp.noise_power
    snr_R_1 = P / (inp.g("h1") / g3 * P + s2)
    snr_S_1 = P / s2
    sp = math.sqrt(P)
    H = np.array([[inp.h4 * sp / math.sqrt(g2), inp.h3 * sp / math.sqrt(g3)],
                  [inp.h5p * sp / math.sqrt(g1p), 0.0]], dtype=complex)
    options, bd = _s2_options(inp, H, 1.0, min(snr_R_1, snr_S_1))
    bd.update({"RSNR_1": snr_R_1, "SSNR_1": snr_S_1, "xi": 1.0})
    return _outcome(options, 2, P / g2 + P / g3 + P / g1p, bd)


# ---------------------------------------------------------------------------
# Relayed downlink + direct downlink
# ---------------------------------------------------------------------------

def _s3_options(inp, H, xi, snr_1_1):
    s2 = inp.noise_power
    snr_2_2_o1 = mmse_sinr_two_obs(H, xi, s2, target=2)
    snr_2_1_o2 = mmse_sinr_two_obs(H, xi, s2, target=1)
    snr_2_2_o2 = mmse_sinr_two_obs(H, xi, s2, target=2, cancel_other=True)
    options = [(snr_1_1, snr_2_2_o1), (min(snr_1_1, snr_2_1_o2), snr_2_2_o2)]
    h22 = H[1, 1]
    return options, {"2SNR^1_2": snr_2_2_o1, "2SNR^2_1": snr_2_1_o2,
                     "2SNR^2_2": snr_2_2_o2,
                     "gamma22": (h22.real**2 + h22.imag**2) / s2}


def cdr_s3_af(inp: SchemeInput) -> SchemeOutcome:
    """Relayed downlink combined with a direct downlink, AF relay.

    Slot 1: SN -> R (``h1``), overheard by user 2 over ``h3``.  Slot 2:
    R -> user 1 (``h2p``) while the SN sends to user 2 (``h3p``); ``h5p`` is
    R -> user 2.
    """
    g1, g2p, g3p = _aimed(inp, "h1", "h2p", "h3p")
    P, s2 = inp.P, inp.noise_power
    sp = math.sqrt(P)
    alpha = 1.0 / (P + s2)
    snr_1_1 = alpha * P**2 / (alpha * P * s2 + s2)
    fwd = inp.h5p * math.sqrt(alpha * P) / math.sqrt(g2p)
    H = np.array([[inp.h3 * sp / math.sqrt(g1), 0.0],
                  [fwd * _unit(inp.h1) * sp, _unit(inp.h3p) * sp]], dtype=complex)
    xi = 1.0 + inp.g("h5p") / g2p * alpha * P
    options, bd = _s3_options(inp, H, xi, snr_1_1)
    bd.update({"alpha": alpha, "xi": xi, "1SNR_1": snr_1_1})
    return _outcome(options, 2, P / g1 + P / g2p + P / g3p, bd)


def cdr_s3_df(inp: SchemeInput) -> SchemeOutcome:
    """DF counterpart of :func:`cdr_s3_af`; the relay resends ``x1`` cleanly."""
    g1, g2p, g3p = _aimed(inp, "h1", "h2p", "h3p")
    P, s2 = inp.P, inp.noise_power
    sp = math.sqrt(P)
    snr_R_1 = P / s2
    snr_1_1 = P / s2
    H = np.array([[inp.h3 * sp / math.sqrt(g1), 0.0],
                  [inp.h5p * sp / math.sqrt(g2p), _unit(inp.h3p) * sp]], dtype=complex)
    options, bd = _s3_options(inp, H, 1.0, min(snr_R_1, snr_1_1))
    bd.update({"RSNR_1": snr_R_1, "1SNR_1": snr_1_1, "xi": 1.0})
    return _outcome(options, 2, P / g1 + P / g2p + P / g3p, bd)


# ---------------------------------------------------------------------------
# Relayed uplink + direct uplink
# ---------------------------------------------------------------------------

def _repetition(inp: SchemeInput) -> tuple[complex, float]:
    """User 2's slot-2 repeat of ``x2`` at power ``beta * P`` toward the SN.

    Returns the received coefficient and the transmit power spent.  A dead
    slot-2 link to the SN disables the repeat.
    """
    g3p = inp.g("h3p")
    if inp.beta == 0 or g3p == 0:
        return 0j, 0.0
    return _unit(inp.h3p) * math.sqrt(inp.beta * inp.P), inp.beta * inp.P / g3p


def _s4_options(inp, H, xi, snr_R_1):
    s2 = inp.noise_power
    snr_1_o1 = mmse_sinr_two_obs(H, xi, s2, target=1)
    snr_2_o1 = mmse_sinr_two_obs(H, xi, s2, target=2, cancel_other=True)
    snr_2_o2 = mmse_sinr_two_obs(H, xi, s2, target=2)
    snr_1_o2 = mmse_sinr_two_obs(H, xi, s2, target=1, cancel_other=True)
    options = [(min(snr_1_o1, snr_R_1), snr_2_o1), (min(snr_1_o2, snr_R_1), snr_2_o2)]
    return options, {"SSNR^1_1": snr_1_o1, "SSNR^1_2": snr_2_o1,
                     "SSNR^2_2": snr_2_o2, "SSNR^2_1": snr_1_o2}


def cdr_s4_af(inp: SchemeInput) -> SchemeOutcome:
    """Relayed uplink combined with a direct uplink, AF relay.

    Slot 1: user 1 -> R (``h2``) while user 2 sends to the SN (``h3``);
    ``h5`` is user 2 -> R.  Slot 2: R -> SN (``h1p``) while user 2 repeats
    ``x2`` with power factor ``beta`` over ``h3p``.  The SN decodes both
    symbols from its two observations.
    """
    g2, g3, g1p = _aimed(inp, "h2", "h3", "h1p")
    P, s2 = inp.P, inp.noise_power
    sp = math.sqrt(P)
    alpha = 1.0 / (P + inp.g("h5") / g3 * P + s2)
    fwd = _unit(inp.h1p) * math.sqrt(alpha * P)
    rep, rep_power = _repetition(inp)
    H = np.array([[0.0, _unit(inp.h3) * sp],
                  [fwd * _unit(inp.h2) * sp, fwd * inp.h5 * sp / math.sqrt(g3) + rep]],
                 dtype=complex)
    xi = 1.0 + alpha * P
    options, bd = _s4_options(inp, H, xi, math.inf)
    bd.update({"alpha": alpha, "xi": xi})
    return _outcome(options, 2, P / g2 + P / g3 + P / g1p + rep_power, bd)


def cdr_s4_df(inp: SchemeInput) -> SchemeOutcome:
    """DF counterpart of :func:`cdr_s4_af`; the relay resends ``x1`` cleanly."""
    g2, g3, g1p = _aimed(inp, "h2", "h3", "h1p")
    P, s2 = inp.P, inp.noise_power
    sp = math.sqrt(P)
    snr_R_1 = P / (inp.g("h5") / g3 * P + s2)
    rep, rep_power = _repetition(inp)
    H = np.array([[0.0, _unit(inp.h3) * sp],
                  [_unit(inp.h1p) * sp, rep]], dtype=complex)
    options, bd = _s4_options(inp, H, 1.0, snr_R_1)
    bd.update({"RSNR_1": snr_R_1, "xi": 1.0})
    return _outcome(options, 2, P / g2 + P / g3 + P / g1p + rep_power, bd)


# ---------------------------------------------------------------------------

#: (relayed user's direction, direct user's direction) -> scheme id
SCHEME_IDS = {
    (Direction.DOWNLINK, Direction.UPLINK): "main",
    (Direction.UPLINK, Direction.DOWNLINK): "s2",
    (Direction.DOWNLINK, Direction.DOWNLINK): "s3",
    (Direction.UPLINK, Direction.UPLINK): "s4",
}

#: coefficients of the power-controlled (aimed) links of each scheme
AIMED_LINKS = {
    "main": ("h1", "h2p", "h3p"),
    "s2": ("h2", "h3", "h1p"),
    "s3": ("h1", "h2p", "h3p"),
    "s4": ("h2", "h3", "h1p"),
}

SCHEME_FUNCS = {
    ("main", RelayMode.AF): cdr_main_af,
    ("main", RelayMode.DF): cdr_main_df,
    ("s2", RelayMode.AF): cdr_s2_af,
    ("s2", RelayMode.DF): cdr_s2_df,
    ("s3", RelayMode.AF): cdr_s3_af,
    ("s3", RelayMode.DF): cdr_s3_df,
    ("s4", RelayMode.AF): cdr_s4_af,
    ("s4", RelayMode.DF): cdr_s4_df,
}


def scheme_id(relayed_dir: Direction, direct_dir: Direction) -> str:
    return SCHEME_IDS[(Direction(relayed_dir), Direction(direct_dir))]


def scheme_dispatch(relayed_dir: Direction, direct_dir: Direction,
                    mode: RelayMode, inp: SchemeInput) -> SchemeOutcome:
    sid = scheme_id(relayed_dir, direct_dir)
    return SCHEME_FUNCS[(sid, RelayMode(mode))](inp)
