import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2icdr import oracles
from v2icdr.channel import LinkInfeasibleError
from v2icdr.schemes import (
    AIMED_LINKS,
    SCHEME_FUNCS,
    Direction,
    RelayMode,
    SchemeInput,
    af_relay_e2e_snr,
    capacity,
    cdr_main_af,
    cdr_main_df,
    cdr_s2_af,
    cdr_s3_af,
    cdr_s3_df,
    cdr_s4_af,
    cdr_s4_df,
    mmse_sinr_two_obs,
    noncdr_rates,
    scheme_dispatch,
)
from v2icdr.schemes import _outcome

AF, DF = RelayMode.AF, RelayMode.DF
UL, DL = Direction.UPLINK, Direction.DOWNLINK
ALL_GAINS = ("h1", "h2", "h3", "h4", "h5", "h1p", "h2p", "h3p", "h4p", "h5p")


def cg(rng):
    return complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2)


def random_input(rng, gamma=None, beta=1.0):
    g = 10 ** rng.uniform(-1, 3) if gamma is None else gamma
    return SchemeInput(gamma_o=g, beta=beta, **{k: cg(rng) for k in ALL_GAINS})


# ---------------------------------------------------------------- basics

def test_capacity_examples():
    assert capacity(0) == 0
    assert capacity(1) == 1
    assert capacity(3) == 2
    with pytest.raises(ValueError):
        capacity(-0.1)


def test_af_cascade_examples():
    assert af_relay_e2e_snr(0) == 0
    assert af_relay_e2e_snr(10) == pytest.approx(100 / 21, rel=1e-15)
    assert af_relay_e2e_snr(1) == pytest.approx(1 / 3, rel=1e-15)


def test_af_cascade_monte_carlo(rng):
    est = oracles.af_cascade_monte_carlo(10.0, 200_000, rng)
    assert abs(est / (100 / 21) - 1) < 0.02


@given(st.floats(1e-6, 1e6))
def test_af_inferior_to_direct(g):
    assert af_relay_e2e_snr(g) < g


def test_noncdr_examples():
    df = noncdr_rates(DF, 1.0)
    assert df.rates == (1.0, 1.0) and df.slots_used == 3
    af = noncdr_rates(AF, 1.0)
    assert af.rates[0] == pytest.approx(math.log2(4 / 3))
    assert af.rates[1] == 1.0
    for mode in RelayMode:
        assert noncdr_rates(mode, 0.0).rates == (0.0, 0.0)
    assert noncdr_rates(DF, 2.0, aimed_gains=[1.0, 0.5, 0.25]).energy == pytest.approx(14.0)


# ---------------------------------------------------------------- main scheme

def main_input(g, r43=0.0, r12=0.0):
    return SchemeInput(gamma_o=g, h1=1, h2p=1, h3p=1, h4p=math.sqrt(r43), h1p=math.sqrt(r12))


def test_main_af_no_cross_interference():
    out = cdr_main_af(main_input(10.0))
    assert out.breakdown["1SNR^1_1"] == pytest.approx(100 / 21, rel=1e-14)


def test_main_af_option2_example():
    out = cdr_main_af(main_input(10.0, r43=1.0))
    assert out.breakdown["1SNR^2_2"] == pytest.approx(10 / 11, rel=1e-15)


def test_main_af_sn_snr_forwarded_noise_form():
    # SN SNR for x2 with |h1'| = |h2'|: P / (alpha P sigma^2 + sigma^2) = 110/21.
    # The right-most printed simplification would give 10/12 instead; the two
    # disagree, and the physical (left-hand) expression is implemented.
    out = cdr_main_af(main_input(10.0, r12=1.0))
    assert Fraction(out.breakdown["SSNR_2"]).limit_denominator(100) == Fraction(110, 21)
    assert oracles.af_main_printed_ssnr2(10.0, 1.0) == pytest.approx(10 / 12)
    # the printed form would also break decoupling: at r12 = 0 it is g/(g+1), not g
    assert cdr_main_af(main_input(10.0)).breakdown["SSNR_2"] == 10.0


def test_main_df_examples():
    clean = cdr_main_df(main_input(10.0))
    assert clean.option_snrs[0][0] == 10.0
    assert clean.rates[0] == pytest.approx(capacity(10.0))
    out = cdr_main_df(main_input(10.0, r43=1.0))
    assert out.breakdown["1SNR^1_1"] == pytest.approx(10 / 11, rel=1e-15)
    for r in (0.0, 0.3, 7.0):
        assert cdr_main_df(main_input(4.0, r43=r)).breakdown["1SNR^2_1"] == 4.0


def test_main_af_interference_monotone():
    vals = [cdr_main_af(main_input(10.0, r43=r)).breakdown["1SNR^1_1"]
            for r in np.linspace(0, 5, 30)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("seed", range(3))
def test_main_closed_forms(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        inp = random_input(rng)
        r43 = inp.g("h4p") / inp.g("h3p")
        r12 = inp.g("h1p") / inp.g("h2p")
        for func, forms in ((cdr_main_af, oracles.af_main_closed_forms(inp.gamma_o, r43, r12)),
                            (cdr_main_df, oracles.df_main_closed_forms(inp.gamma_o, r43))):
            bd = func(inp).breakdown
            for k, v in forms.items():
                assert bd[k] == pytest.approx(v, rel=1e-12)


def test_zero_aimed_gain_rejected():
    with pytest.raises(LinkInfeasibleError):
        cdr_main_af(SchemeInput(gamma_o=1.0, h1=1, h2p=1, h3p=0))
    with pytest.raises(LinkInfeasibleError):
        cdr_s4_df(SchemeInput(gamma_o=1.0, h2=1, h3=0, h1p=1))


# ---------------------------------------------------------------- MMSE kernel

def test_mmse_diagonal():
    H = np.diag([2.0, 3.0j])
    assert mmse_sinr_two_obs(H, 1.0, 1.0, 1) == pytest.approx(4.0)
    assert mmse_sinr_two_obs(H, 1.0, 1.0, 2) == pytest.approx(9.0)


def test_mmse_zero_target_column():
    H = np.array([[0.0, 1.0], [0.0, 2.0]])
    assert mmse_sinr_two_obs(H, 1.5, 1.0, 1) == 0.0


def test_mmse_validation():
    with pytest.raises(ValueError):
        mmse_sinr_two_obs(np.eye(2), 0.5)
    with pytest.raises(ValueError):
        mmse_sinr_two_obs(np.eye(2), 1.0, target=3)


def test_mmse_beats_single_observation(rng):
    for _ in range(2000):
        H = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        xi = 1 + rng.exponential()
        noise = (1.0, xi)
        for t in (1, 2):
            sinr = mmse_sinr_two_obs(H, xi, 1.0, t)
            for j in range(2):
                single = abs(H[j, t - 1]) ** 2 / (noise[j] + abs(H[j, 2 - t]) ** 2)
                assert sinr >= single * (1 - 1e-12)


def test_mmse_matches_closed_form(rng):
    # with g_kj = signal k at observation j and g_b = |det H|^2 / sigma^4
    for _ in range(1000):
        H = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        xi, s2 = 1 + rng.exponential(), 10 ** rng.uniform(-1, 1)
        for t in (1, 2):
            assert mmse_sinr_two_obs(H, xi, s2, t) == pytest.approx(
                oracles.mmse_closed_form(H, xi, s2, t), rel=1e-9)


# ---------------------------------------------------------------- appendix schemes

def test_s2_decoupled():
    g = 10.0
    out = cdr_s2_af(SchemeInput(gamma_o=g, h2=1, h3=1, h1p=1))
    assert out.breakdown["alpha"] == pytest.approx(1 / (g + 1))
    assert out.breakdown["SSNR_1"] == pytest.approx(g * g / (2 * g + 1))
    assert out.snr[1] == pytest.approx(g)


def test_s2_alpha_example():
    out = cdr_s2_af(SchemeInput(gamma_o=10.0, h2=1, h3=1, h1p=1, h1=1))
    assert out.breakdown["alpha"] == pytest.approx(1 / 21, rel=1e-15)
    assert out.breakdown["SSNR_1"] == pytest.approx(100 / 31, rel=1e-15)


def test_s3_decoupled():
    g = 10.0
    out = cdr_s3_af(SchemeInput(gamma_o=g, h1=1, h2p=1, h3p=1))
    assert out.breakdown["xi"] == 1.0
    assert out.snr == pytest.approx((g * g / (2 * g + 1), g))


def test_s3_option2_equals_gamma22_over_xi():
    # xi = 1 + (|h5'|^2/|h2'|^2) alpha P = 2 needs |h5'|^2 = 1.1 at gamma_o = 10
    out = cdr_s3_af(SchemeInput(gamma_o=10.0, h1=1, h2p=1, h3p=1, h3=0.7, h5p=math.sqrt(1.1)))
    assert out.breakdown["xi"] == pytest.approx(2.0, rel=1e-15)
    assert out.breakdown["2SNR^2_2"] == pytest.approx(5.0, rel=1e-15)


def test_s4_decoupled_and_xi():
    g = 10.0
    out = cdr_s4_af(SchemeInput(gamma_o=g, beta=0.0, h2=1, h3=1, h1p=1, h3p=1))
    assert out.snr == pytest.approx((g * g / (2 * g + 1), g))
    bd = cdr_s4_af(SchemeInput(gamma_o=1.0, h2=1, h3=1, h1p=1, h5=0.4)).breakdown
    assert bd["xi"] == 1.0 + bd["alpha"] * 1.0


def test_s4_repetition_helps_without_relay_leakage(rng):
    for _ in range(500):
        inp = random_input(rng)
        inp = SchemeInput(**{**inp.__dict__, "h5": 0j})
        for func in (cdr_s4_af, cdr_s4_df):
            with_rep = func(inp).option_snrs[0][1]
            without = func(SchemeInput(**{**inp.__dict__, "beta": 0.0})).option_snrs[0][1]
            assert with_rep >= without * (1 - 1e-12)


def test_s4_repetition_costs_energy():
    base = dict(gamma_o=2.0, h2=1, h3=1, h1p=1, h3p=0.5)
    e0 = cdr_s4_af(SchemeInput(beta=0.0, **base)).energy
    e1 = cdr_s4_af(SchemeInput(beta=1.0, **base)).energy
    assert e1 - e0 == pytest.approx(2.0 / 0.25)


# ---------------------------------------------------------------- all schemes

@pytest.mark.parametrize("key", list(SCHEME_FUNCS))
def test_decoupling(key):
    sid, mode = key
    rng = np.random.default_rng(hash(key) % 2**32)
    for _ in range(50):
        g = 10 ** rng.uniform(-1, 3)
        gains = {k: cg(rng) for k in AIMED_LINKS[sid]}
        out = SCHEME_FUNCS[key](SchemeInput(gamma_o=g, beta=0.0, **gains))
        ref = noncdr_rates(mode, g)
        assert out.slots_used == 2 and ref.slots_used == 3
        assert out.snr == pytest.approx(ref.snr, rel=1e-12)


@pytest.mark.parametrize("key", list(SCHEME_FUNCS))
def test_option_dominance_and_capacity(key):
    rng = np.random.default_rng(7)
    for _ in range(100):
        out = SCHEME_FUNCS[key](random_input(rng))
        assert out.sum_rate == max(out.option_sum_rates())
        assert out.rates == (capacity(out.snr[0]), capacity(out.snr[1]))
        assert out.snr == out.option_snrs[out.option - 1]


def test_option_tie_picks_first():
    out = _outcome([(3.0, 1.0), (1.0, 3.0)], 2, None, {})
    assert out.option == 1
    assert _outcome([(1.0, 1.0), (1.0, 3.0)], 2, None, {}).option == 2


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-6, 1e6))
def test_gain_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    inp = random_input(rng)
    for func in SCHEME_FUNCS.values():
        a, b = func(inp), func(inp.scaled(c))
        for x, y in zip(a.option_snrs, b.option_snrs):
            assert x == pytest.approx(y, rel=1e-9)


def test_dispatch():
    inp = random_input(np.random.default_rng(0))
    assert scheme_dispatch(DL, UL, AF, inp) == cdr_main_af(inp)
    assert scheme_dispatch(UL, UL, AF, inp) == cdr_s4_af(inp)
    assert scheme_dispatch(DL, DL, AF, inp) == cdr_s3_af(inp)
    assert scheme_dispatch(UL, DL, AF, inp) == cdr_s2_af(inp)
    assert scheme_dispatch("DL", "DL", "DF", inp) == cdr_s3_df(inp)
