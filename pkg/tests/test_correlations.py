"""Photon-correlation algebra against independent oracles."""

import numpy as np
import pytest

from cvbell.circuit import CircuitConfig, analyze, build_bell_state, pair_marginal
from cvbell.correlations import (
    BellAngles,
    RTable,
    SecondMoments,
    bell_value,
    e_value,
    p_values,
    r_from_components,
    r_from_moments,
    visibility,
)
from cvbell.errors import FitDegenerate, NoPhotons
from cvbell.gaussian import ChannelParams
from cvbell.reference import tmsv_nn, tmsv_nn_fock, wick_fourth_moment

# 2 nbar^2 + nbar for r = 0.5, frozen from both closed forms agreeing.
TMSV_NN_R05 = 0.419008605363


def random_physical_moments(n_sets: int, seed: int = 101):
    """Moment sets taken from genuinely physical analyzed circuit states."""
    rng = np.random.default_rng(seed)
    sets = []
    while len(sets) < n_sets:
        v_sqz = rng.uniform(0.5, 0.99)
        purity = rng.uniform(0.9, 1.0)
        eta = rng.uniform(0.5, 1.0)
        epsilon = (1.0 - eta) + rng.uniform(0.0, 0.1)
        cfg = CircuitConfig(
            v_sqz=v_sqz,
            v_asqz=1.0 / (purity**2 * v_sqz),
            channel=ChannelParams(eta, epsilon),
        )
        gamma = analyze(
            build_bell_state(cfg), rng.uniform(0.0, np.pi), rng.uniform(0.0, np.pi)
        )
        for pair in (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-")):
            sets.append(pair_marginal(gamma, *pair))
    return sets[:n_sets]


def test_r_from_moments_matches_wick_enumeration_on_100_random_states():
    for m in random_physical_moments(100):
        direct = r_from_moments(m)
        oracle = wick_fourth_moment(
            m.xx, m.pp, m.xp, m.px, m.va_x, m.va_p, m.vb_x, m.vb_p, m.v_v
        )
        assert direct == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
def test_r_from_moments_matches_tmsv_closed_form(r):
    # TMSV second moments: both marginals at cosh(2r), X correlated and
    # P anticorrelated at sinh(2r).
    c, s = np.cosh(2.0 * r), np.sinh(2.0 * r)
    m = SecondMoments(
        xx=s, pp=-s, xp=0.0, px=0.0, va_x=c, va_p=c, vb_x=c, vb_p=c
    )
    assert r_from_moments(m) == pytest.approx(tmsv_nn(r), abs=1e-10)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
def test_tmsv_closed_form_matches_fock_summation(r):
    assert tmsv_nn(r) == pytest.approx(tmsv_nn_fock(r), abs=1e-10)


def test_tmsv_frozen_value_at_half():
    assert tmsv_nn(0.5) == pytest.approx(TMSV_NN_R05, abs=1e-10)


def test_tmsv_rejects_negative_parameter():
    with pytest.raises(ValueError):
        tmsv_nn(-0.1)
    with pytest.raises(ValueError):
        tmsv_nn_fock(-0.1)


def test_r_of_uncorrelated_vacuum_is_zero():
    m = SecondMoments(
        xx=0.0, pp=0.0, xp=0.0, px=0.0, va_x=1.0, va_p=1.0, vb_x=1.0, vb_p=1.0
    )
    assert r_from_moments(m) == 0.0


def test_r_from_components_vectorizes_over_replicates():
    xx = np.array([0.5, 0.0])
    out = r_from_components(
        xx, -xx, 0.0 * xx, 0.0 * xx,
        np.full(2, 1.2), np.full(2, 1.2), np.full(2, 1.2), np.full(2, 1.2),
    )
    assert out.shape == (2,)
    scalar = r_from_components(0.5, -0.5, 0.0, 0.0, 1.2, 1.2, 1.2, 1.2)
    assert out[0] == pytest.approx(scalar, abs=1e-15)


def test_second_moments_reject_cauchy_schwarz_violation():
    with pytest.raises(ValueError):
        SecondMoments(
            xx=2.0, pp=0.0, xp=0.0, px=0.0,
            va_x=1.0, va_p=1.0, vb_x=1.0, vb_p=1.0,
        )
    with pytest.raises(ValueError):
        SecondMoments(
            xx=0.0, pp=0.0, xp=0.0, px=0.0,
            va_x=-1.0, va_p=1.0, vb_x=1.0, vb_p=1.0,
        )


def test_canonical_angles_values_and_pair_order():
    angles = BellAngles.canonical()
    assert angles.theta_a == pytest.approx(3.0 * np.pi / 8.0)
    assert angles.theta_a_prime == pytest.approx(np.pi / 8.0)
    assert angles.theta_b == pytest.approx(np.pi / 4.0)
    assert angles.theta_b_prime == 0.0
    pairs = angles.pairs()
    assert pairs[0] == (angles.theta_a, angles.theta_b)
    assert pairs[1] == (angles.theta_a_prime, angles.theta_b_prime)
    assert pairs[2] == (angles.theta_a_prime, angles.theta_b)
    assert pairs[3] == (angles.theta_a, angles.theta_b_prime)


def test_e_value_algebra_and_range():
    table = RTable(r_pp=0.4, r_mm=0.4, r_pm=0.1, r_mp=0.1)
    assert e_value(table) == pytest.approx(0.6)
    assert p_values(table) == pytest.approx((0.4, 0.4, 0.1, 0.1))
    one_sided = RTable(r_pp=1.0, r_mm=1.0, r_pm=0.0, r_mp=0.0)
    assert e_value(one_sided) == 1.0


def test_e_value_raises_no_photons_on_vacuum_table():
    with pytest.raises(NoPhotons):
        e_value(RTable(0.0, 0.0, 0.0, 0.0))
    with pytest.raises(NoPhotons):
        p_values(RTable(0.0, 0.0, 0.0, 0.0))


def test_rtable_rejects_negative_or_nonfinite_rates():
    with pytest.raises(ValueError):
        RTable(r_pp=-0.1, r_mm=0.0, r_pm=0.0, r_mp=0.0)
    with pytest.raises(ValueError):
        RTable(r_pp=np.nan, r_mm=0.0, r_pm=0.0, r_mp=0.0)


def test_bell_value_is_absolute_chsh_combination():
    assert bell_value((-0.7, -0.7, -0.7, 0.7)) == pytest.approx(2.8)
    assert bell_value((0.7, 0.7, 0.7, -0.7)) == pytest.approx(2.8)
    assert bell_value((0.0, 0.0, 0.0, 0.0)) == 0.0


def test_visibility_recovers_known_sinusoid_amplitude():
    th = np.linspace(0.0, np.pi, 40)
    p = 0.5 + 0.3 * np.cos(2.0 * th - 0.7)
    assert visibility(th, p) == pytest.approx(0.6, abs=1e-12)


def test_visibility_of_constant_fringe_is_zero():
    th = np.linspace(0.0, np.pi, 16)
    assert visibility(th, np.full_like(th, 0.25)) == pytest.approx(0.0, abs=1e-12)


def test_visibility_clamped_to_unit_interval():
    th = np.linspace(0.0, np.pi, 64)
    p = 0.2 + 0.25 * np.cos(2.0 * th)  # amplitude above offset
    assert visibility(th, p) == 1.0


def test_visibility_input_validation():
    th = np.linspace(0.0, np.pi, 6)
    with pytest.raises(ValueError):
        visibility(th, np.ones(6))  # too few points
    th = np.linspace(0.0, 0.3, 16)
    with pytest.raises(ValueError):
        visibility(th, np.ones(16))  # span below half a period
    th = np.linspace(0.0, np.pi, 16)
    with pytest.raises(FitDegenerate):
        visibility(th, 0.3 * np.sin(2.0 * th))  # zero fitted offset
