"""Independent references the test suite checks the main pipeline against.

Everything here is built from textbook identities and literal enumerations
-- thermal photon statistics, Wick pairings, a truncated Fock basis -- and
deliberately imports nothing from the covariance pipeline, so a test that
compares the two routes is comparing genuinely separate derivations.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import expm


def tmsv_nn(r: float) -> float:
    """<n_A n_B> of a two-mode squeezed vacuum with parameter r.

    Each marginal is thermal with nbar = sinh(r)^2 and the photon numbers
    are perfectly correlated, so <n_A n_B> = <n^2> = 2 nbar^2 + nbar.
    """
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    nbar = math.sinh(r) ** 2
    return 2.0 * nbar * nbar + nbar


def tmsv_nn_fock(r: float, cutoff: int = 60) -> float:
    """Same moment by direct summation of the thermal photon distribution.

    sum_n n^2 * nbar^n / (1 + nbar)^(n+1), truncated at `cutoff` photons.
    """
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    nbar = math.sinh(r) ** 2
    total = 0.0
    for n in range(cutoff + 1):
        total += n * n * nbar**n / (1.0 + nbar) ** (n + 1)
    return total


def _pairings(ops):
    """The three pair partitions of four operators."""
    a, b, c, d = ops
    return (((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c)))


def wick_fourth_moment(
    xx: float,
    pp: float,
    xp: float,
    px: float,
    va_x: float,
    va_p: float,
    vb_x: float,
    vb_p: float,
    v_v: float = 1.0,
) -> float:
    """(1/16) <(X_A^2 + P_A^2 - 2 Vv)(X_B^2 + P_B^2 - 2 Vv)> by literal
    Wick-pairing enumeration.

    Every fourth-order term <q_A q_A r_B r_B> is expanded over its three pair
    partitions with a plain covariance lookup; nothing is factored by hand,
    so this is an independent check of any closed-form reduction of the same
    moment.
    """
    labels = ("XA", "PA", "XB", "PB")
    cov = {(a, b): 0.0 for a in labels for b in labels}
    for key, value in (
        (("XA", "XA"), va_x),
        (("PA", "PA"), va_p),
        (("XB", "XB"), vb_x),
        (("PB", "PB"), vb_p),
        (("XA", "XB"), xx),
        (("PA", "PB"), pp),
        (("XA", "PB"), xp),
        (("PA", "XB"), px),
    ):
        cov[key] = value
        cov[key[::-1]] = value

    fourth = 0.0
    for qa, rb in itertools.product(("XA", "PA"), ("XB", "PB")):
        ops = (qa, qa, rb, rb)
        for (w, x), (y, z) in _pairings(ops):
            fourth += cov[(w, x)] * cov[(y, z)]
    second = -2.0 * v_v * (va_x + va_p) - 2.0 * v_v * (vb_x + vb_p)
    return (fourth + second + 4.0 * v_v * v_v) / 16.0


def _ladder_product(basis, index, raise_mode: int, lower_mode: int) -> np.ndarray:
    """Matrix of a_raise^dagger a_lower on a truncated Fock basis."""
    dim = len(basis)
    out = np.zeros((dim, dim))
    for col, state in enumerate(basis):
        n_low = state[lower_mode]
        if n_low == 0:
            continue
        target = list(state)
        target[lower_mode] -= 1
        target[raise_mode] += 1
        row = index.get(tuple(target))
        if row is None:
            continue
        out[row, col] = math.sqrt((state[raise_mode] + 1) * n_low)
    return out


def fock_bell_smallr(
    v_sqz: float, theta_a: float, theta_b: float, cutoff: int = 4
) -> float:
    """E(theta_A, theta_B) from a truncated Fock expansion at small squeezing.

    The detected four-mode state is, up to balanced attenuation that cancels
    from E, a pair of two-mode squeezed vacua with opposite-sign parameters
    on the opposite-polarization mode pairs: amplitudes lambda^n (-lambda)^m
    on |n m m n> in (A_h, A_v, B_h, B_v) order, lambda = tanh(r).  The
    analyzer rotations conserve each party's photon number, so exponentiating
    them on the truncated basis is exact sector by sector, and E follows from
    the photon-number products of the rotated state.

    Args:
        v_sqz: squeezed variance, within 5% of vacuum (small-squeezing regime).
        theta_a: A-side analyzer angle, radians.
        theta_b: B-side analyzer angle, radians.
        cutoff: largest total photon number kept.

    Raises:
        ValueError: if v_sqz is outside the small-squeezing range, or the
            cutoff truncates more than 1e-6 of the state's norm.
    """
    if not 0.0 < 1.0 - v_sqz <= 0.05:
        raise ValueError(f"v_sqz = {v_sqz} is outside the small-squeezing range")
    r = -0.5 * math.log(v_sqz)
    lam = math.tanh(r)

    basis = [
        state
        for state in itertools.product(range(cutoff + 1), repeat=4)
        if sum(state) <= cutoff
    ]
    index = {state: k for k, state in enumerate(basis)}

    psi = np.zeros(len(basis))
    kept = 0.0
    for n in range(cutoff // 2 + 1):
        for m in range(cutoff // 2 + 1):
            if 2 * (n + m) > cutoff:
                continue
            psi[index[(n, m, m, n)]] = lam**n * (-lam) ** m
            kept += lam ** (2 * (n + m))
    deficit = 1.0 - kept * (1.0 - lam * lam) ** 2
    if deficit > 1e-6:
        raise ValueError(
            f"cutoff {cutoff} truncates a norm fraction {deficit:.3g} > 1e-6"
        )
    psi /= np.linalg.norm(psi)

    generator_a = _ladder_product(basis, index, 0, 1) - _ladder_product(
        basis, index, 1, 0
    )
    generator_b = _ladder_product(basis, index, 2, 3) - _ladder_product(
        basis, index, 3, 2
    )
    psi = expm(theta_a * generator_a) @ (expm(theta_b * generator_b) @ psi)

    numbers = np.array(basis, dtype=float)
    weights = psi * psi
    r_pp = float(weights @ (numbers[:, 0] * numbers[:, 2]))
    r_mm = float(weights @ (numbers[:, 1] * numbers[:, 3]))
    r_pm = float(weights @ (numbers[:, 0] * numbers[:, 3]))
    r_mp = float(weights @ (numbers[:, 1] * numbers[:, 2]))
    total = r_pp + r_mm + r_pm + r_mp
    if total <= 0.0:
        raise ValueError("truncated state carries no photon pairs")
    return (r_pp + r_mm - r_pm - r_mp) / total
