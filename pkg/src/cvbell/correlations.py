"""Photon-number correlation statistics from quadrature second moments.

For a zero-mean Gaussian pair, the cross correlation of photon numbers
R = <n_A n_B> reduces to second moments through Wick factorization
(<x^2 y^2> = <x^2><y^2> + 2<xy>^2):

    R = (1/16) [ 2(xx^2 + pp^2 + xp^2 + px^2)
                 + (Va_x + Va_p)(Vb_x + Vb_p)
                 - 2 Vv (Va_x + Va_p) - 2 Vv (Vb_x + Vb_p) + 4 Vv^2 ]

with Vv the vacuum second moment in the record's units (1 once normalized).
From the four R values of an analyzer-port pair follow the expectation value
E, the CHSH combination B, and normalized fringes P.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitDegenerate, NoPhotons

# Denominators at or below this are treated as an exact absence of photons.
EPS_DENOM = 1e-12


@dataclass(frozen=True)
class BellAngles:
    """The four analyzer angles of a CHSH measurement, in radians.

    `pairs()` lists the measured combinations in the fixed order used by the
    whole package: (a, b), (a', b'), (a', b), (a, b'); B is then
    |E1 + E2 + E3 - E4|.
    """

    theta_a: float
    theta_a_prime: float
    theta_b: float
    theta_b_prime: float

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not math.isfinite(value):
                raise ValueError(f"angle {name} must be finite, got {value}")

    @classmethod
    def canonical(cls) -> "BellAngles":
        """The maximal-violation assignment of {pi/8, 3pi/8} x {0, pi/4}.

        Of the four ways to assign those sets to (a, a') and (b, b'), only
        (3pi/8, pi/8, pi/4, 0) makes the CHSH combination maximal for this
        source; the others cancel to zero.
        """
        return cls(3.0 * np.pi / 8.0, np.pi / 8.0, np.pi / 4.0, 0.0)

    def pairs(self) -> tuple[tuple[float, float], ...]:
        """(theta_A, theta_B) combinations in CHSH order."""
        return (
            (self.theta_a, self.theta_b),
            (self.theta_a_prime, self.theta_b_prime),
            (self.theta_a_prime, self.theta_b),
            (self.theta_a, self.theta_b_prime),
        )

    def shifted(self, delta: float) -> "BellAngles":
        """All four angles shifted by the same offset."""
        return BellAngles(
            self.theta_a + delta,
            self.theta_a_prime + delta,
            self.theta_b + delta,
            self.theta_b_prime + delta,
        )


@dataclass(frozen=True)
class SecondMoments:
    """Cross moments and variances of one analyzer-port pair.

    xx, pp, xp, px are <X_A X_B>, <P_A P_B>, <X_A P_B>, <P_A X_B>; va_*/vb_*
    are the port variances; v_v is the vacuum second moment in the same units.
    """

    xx: float
    pp: float
    xp: float
    px: float
    va_x: float
    va_p: float
    vb_x: float
    vb_p: float
    v_v: float = 1.0

    def __post_init__(self) -> None:
        for name in ("va_x", "va_p", "vb_x", "vb_p", "v_v"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for cross, va, vb in (
            ("xx", self.va_x, self.vb_x),
            ("pp", self.va_p, self.vb_p),
            ("xp", self.va_x, self.vb_p),
            ("px", self.va_p, self.vb_x),
        ):
            bound = math.sqrt(va * vb) + 1e-9
            if abs(getattr(self, cross)) > bound:
                raise ValueError(
                    f"|{cross}| = {abs(getattr(self, cross)):.6g} exceeds the "
                    f"Cauchy-Schwarz bound {bound:.6g}"
                )


def r_from_components(xx, pp, xp, px, va_x, va_p, vb_x, vb_p, v_v=1.0):
    """Photon correlation R from raw moment components.

    Accepts scalars or same-shape arrays, so bootstrap replicates can be
    evaluated in one vectorized call.
    """
    sa = va_x + va_p
    sb = vb_x + vb_p
    return (
        2.0 * (xx * xx + pp * pp + xp * xp + px * px)
        + sa * sb
        - 2.0 * v_v * sa
        - 2.0 * v_v * sb
        + 4.0 * v_v * v_v
    ) / 16.0


def r_from_moments(m: SecondMoments) -> float:
    """Photon correlation <n_A n_B> of one port pair."""
    return float(
        r_from_components(
            m.xx, m.pp, m.xp, m.px, m.va_x, m.va_p, m.vb_x, m.vb_p, m.v_v
        )
    )


@dataclass(frozen=True)
class RTable:
    """The four photon correlations of one analyzer setting.

    r_pp, r_mm, r_pm, r_mp are R for the (+,+), (-,-), (+,-), (-,+) port
    pairs.  n_clamped counts values that came out negative within numerical
    tolerance and were clamped to zero by the builder.
    """

    r_pp: float
    r_mm: float
    r_pm: float
    r_mp: float
    n_clamped: int = 0

    def __post_init__(self) -> None:
        for name in ("r_pp", "r_mm", "r_pm", "r_mp"):
            v = getattr(self, name)
            if v < 0.0 or not math.isfinite(v):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def values(self) -> tuple[float, float, float, float]:
        return (self.r_pp, self.r_mm, self.r_pm, self.r_mp)

    def total(self) -> float:
        return self.r_pp + self.r_mm + self.r_pm + self.r_mp


@dataclass(frozen=True)
class BellResult:
    """E values (in `BellAngles.pairs()` order), their CHSH combination, and
    the angle set they were measured at."""

    e_values: tuple[float, float, float, float]
    b: float
    angle_set: BellAngles


def e_value(t: RTable) -> float:
    """Expectation value E = (R++ + R-- - R+- - R-+) / (sum of all four).

    Raises:
        NoPhotons: when the denominator vanishes (exact vacuum); a silent
            zero here would fabricate a correlation.
    """
    denom = t.total()
    if denom <= EPS_DENOM:
        raise NoPhotons(f"total photon correlation {denom:.3g} is numerically zero")
    return (t.r_pp + t.r_mm - t.r_pm - t.r_mp) / denom


def bell_value(e_values) -> float:
    """CHSH combination |E1 + E2 + E3 - E4| of four expectation values."""
    e1, e2, e3, e4 = (float(e) for e in e_values)
    return abs(e1 + e2 + e3 - e4)


def p_values(t: RTable) -> tuple[float, float, float, float]:
    """Normalized fringe values P_ij = R_ij / sum, in (++, --, +-, -+) order.

    Raises:
        NoPhotons: when the denominator vanishes.
    """
    denom = t.total()
    if denom <= EPS_DENOM:
        raise NoPhotons(f"total photon correlation {denom:.3g} is numerically zero")
    return (t.r_pp / denom, t.r_mm / denom, t.r_pm / denom, t.r_mp / denom)


def visibility(theta_b: np.ndarray, p: np.ndarray) -> float:
    """Fringe visibility (max - min)/(max + min) from a sinusoid fit.

    Fits p(theta_b) = offset + alpha cos(2 theta_b) + beta sin(2 theta_b) by
    linear least squares -- the fringe period is pi in theta_b because the
    analyzer angle enters all second moments through 2*theta -- and returns
    amplitude/offset clamped to [0, 1].  A constant fringe has amplitude 0
    and therefore visibility 0.  The fixed-period fit, rather than a raw
    min/max, keeps the estimate robust on sampled fringes.

    Args:
        theta_b: analyzer angles, radians; at least 8 points spanning at
            least half a period (pi/2).
        p: fringe values at those angles.

    Raises:
        ValueError: if the grid is too short or too narrow.
        FitDegenerate: if the fitted offset vanishes, making the ratio
            undefined.
    """
    th = np.asarray(theta_b, dtype=float)
    pv = np.asarray(p, dtype=float)
    if th.ndim != 1 or th.shape != pv.shape:
        raise ValueError("theta_b and p must be 1-D arrays of equal length")
    if th.size < 8:
        raise ValueError(f"fringe needs at least 8 points, got {th.size}")
    if np.ptp(th) < np.pi / 2.0 - 1e-12:
        raise ValueError("fringe must span at least half a period (pi/2)")
    design = np.column_stack(
        [np.ones_like(th), np.cos(2.0 * th), np.sin(2.0 * th)]
    )
    coef, *_ = np.linalg.lstsq(design, pv, rcond=None)
    offset, alpha, beta = coef
    amplitude = math.hypot(alpha, beta)
    if offset <= EPS_DENOM:
        raise FitDegenerate(
            f"fitted fringe offset {offset:.3g} is too small for a visibility"
        )
    return min(amplitude / offset, 1.0)
