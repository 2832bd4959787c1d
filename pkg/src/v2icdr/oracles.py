"""Independent reference computations used by the self-test and the test suite.

Nothing here calls into the code paths it is meant to check: closed forms
are written in terms of ``gamma_o`` and gain ratios, the MMSE reference
inverts covariance matrices explicitly, and the scheduling reference
enumerates slot assignments without permutations.
"""

from __future__ import annotations

import math

import numpy as np


def log2p1(x: float) -> float:
    return math.log(1.0 + x, 2)


# ---------------------------------------------------------------------------
# Closed forms of the relayed-downlink + direct-uplink scheme
# ---------------------------------------------------------------------------

def af_main_closed_forms(g: float, r43: float, r12: float) -> dict:
    """SNRs of the AF scheme written with ``g = P / sigma^2`` and gain ratios.

    ``r43 = |h4'|^2 / |h3'|^2`` and ``r12 = |h1'|^2 / |h2'|^2``.  The SN's
    SNR for ``x2`` is the forwarded-relay-noise expression
    ``P / (r12 * alpha * P * sigma^2 + sigma^2)`` rewritten in ``g``.
    """
    return {
        "1SNR^1_1": g * g / ((r43 * g + 1.0) * (g + 1.0) + g),
        "1SNR^2_2": r43 * g / (g + 1.0),
        "1SNR^2_1": g * g / (2.0 * g + 1.0),
        "SSNR_2": g * (g + 1.0) / (r12 * g + g + 1.0),
    }


def af_main_printed_ssnr2(g: float, r12: float) -> float:
    """Right-most closed form printed for the SN's ``x2`` SNR.

    It disagrees with the expression to its left (it tends to ``g / (g + 1)``
    rather than ``g`` as ``r12 -> 0``); kept only to document the mismatch.
    """
    return g / (r12 + g + 1.0)


def df_main_closed_forms(g: float, r43: float) -> dict:
    return {
        "RSNR_1": g,
        "1SNR^1_1": g / (r43 * g + 1.0),
        "1SNR^2_2": r43 * g / (g + 1.0),
        "1SNR^2_1": g,
        "SSNR_2": g,
    }


def main_rates(forms: dict, df: bool) -> list[tuple[float, float]]:
    """Per-option rate pairs from the summary displays."""
    r1_cap = forms["RSNR_1"] if df else math.inf
    opt1 = (log2p1(min(forms["1SNR^1_1"], r1_cap)), log2p1(forms["SSNR_2"]))
    opt2 = (log2p1(min(forms["1SNR^2_1"], r1_cap)),
            log2p1(min(forms["1SNR^2_2"], forms["SSNR_2"])))
    return [opt1, opt2]


# ---------------------------------------------------------------------------
# Two-observation MMSE
# ---------------------------------------------------------------------------

def mmse_sinr_bruteforce(H, xi: float, noise_power: float, target: int,
                         cancel_other: bool) -> float:
    """SINR of the MMSE filter ``w = R^-1 h`` built from explicit 2x2 inverses."""
    H = np.asarray(H, dtype=complex)
    N = np.diag([noise_power, xi * noise_power]).astype(complex)
    h = H[:, [target - 1]]
    other = H[:, [2 - target]]
    Q = N if cancel_other else N + other @ other.conj().T
    R = Q + h @ h.conj().T
    w = np.linalg.inv(R) @ h
    sig = abs((w.conj().T @ h)[0, 0]) ** 2
    noise = (w.conj().T @ Q @ w)[0, 0].real
    if sig == 0.0:
        return 0.0
    return float(sig / noise)


def mmse_closed_form(H, xi: float, noise_power: float, target: int) -> float:
    """``(xi*g_t1 + g_t2 + g_b) / (xi*g_o1 + g_o2 + xi)`` with
    ``g_kj = |H[j, k]|^2 / sigma^2`` (symbol ``k`` at observation ``j``) and
    ``g_b = |det H|^2 / sigma^4``."""
    H = np.asarray(H, dtype=complex)
    s = noise_power
    t, o = target - 1, 2 - target
    gt1, gt2 = abs(H[0, t]) ** 2 / s, abs(H[1, t]) ** 2 / s
    go1, go2 = abs(H[0, o]) ** 2 / s, abs(H[1, o]) ** 2 / s
    gb = abs(H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]) ** 2 / s**2
    return (xi * gt1 + gt2 + gb) / (xi * go1 + go2 + xi)


def af_cascade_monte_carlo(g: float, n: int, rng) -> float:
    """Empirical end-to-end SNR of a power-controlled AF two-hop link."""
    P, s2 = g, 1.0
    alpha = 1.0 / (P + s2)

    def cn(k):
        return (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / math.sqrt(2)

    x, z_r, z_1 = cn(n), cn(n), cn(n)
    signal = math.sqrt(alpha * P) * math.sqrt(P) * x
    noise = math.sqrt(alpha * P) * z_r + z_1
    return float(np.mean(np.abs(signal) ** 2) / np.mean(np.abs(noise) ** 2))


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------

def _labeled_pairings(positions: list[int], users: int):
    """All ways of handing each of ``users`` users an unordered pair of positions."""
    if users == 0:
        yield []
        return
    for i, p in enumerate(positions):
        for q in positions[i + 1:]:
            rest = [x for x in positions if x not in (p, q)]
            for tail in _labeled_pairings(rest, users - 1):
                yield [(p, q)] + tail


def brute_force_single_flow(pos: np.ndarray, gains: np.ndarray, directions,
                            radius: float, gamma_o: float, af: bool) -> float:
    """Best single-flow sum rate, enumerating position assignments directly.

    ``pos[t, node]`` and ``gains[t, a, b]`` are indexed by zero-based slot;
    node 0 is the SN and ``directions[i]`` (``"UL"``/``"DL"``) belongs to
    node ``i + 1``.
    """
    n = len(directions)
    n_nodes = pos.shape[1]

    def d(a, b, t):
        return float(np.hypot(*(pos[t - 1, a] - pos[t - 1, b])))

    def ok(a, b, t):
        return d(a, b, t) <= radius and abs(gains[t - 1, a, b]) > 0

    rate_direct = log2p1(gamma_o)
    rate_relay = log2p1(gamma_o**2 / (2 * gamma_o + 1) if af else gamma_o)
    best = 0.0
    for assignment in _labeled_pairings(list(range(1, 2 * n + 1)), n):
        total, slots = 0.0, 0
        for user, (p, q) in enumerate(assignment, start=1):
            if d(user, 0, p) <= radius or d(user, 0, q) <= radius:
                total += rate_direct
                slots += 1
                continue
            slots += 2
            for r in range(1, n_nodes):
                if r == user:
                    continue
                if directions[user - 1] == "DL":
                    feasible = ok(0, r, p) and ok(r, user, q)
                else:
                    feasible = ok(user, r, p) and ok(r, 0, q)
                if feasible:
                    total += rate_relay
                    break
        best = max(best, total / slots)
    return best
