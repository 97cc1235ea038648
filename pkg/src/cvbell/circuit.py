"""The four-mode polarization Bell source and its analyzer stage.

The source interferes two orthogonally squeezed modes on a 50:50
beamsplitter, producing an EPR pair: identical thermal-like marginals
m*I with m = (v_sqz + v_asqz)/2, X quadratures correlated and P
quadratures anticorrelated with strength (v_asqz - v_sqz)/2.  Each EPR
arm is then split between the two measurement parties, one arm in each
polarization, so every analyzer port receives half of one EPR mode:

    A_h, B_h  <-  halves of arm 1 (horizontal),
    A_v, B_v  <-  halves of arm 2 (vertical).

`build_bell_state` assembles the covariance matrix of the four detected
modes: each port has variance (m + 1)/2, the opposite-polarization port
pairs (A_h, B_v) and (A_v, B_h) carry the halved EPR correlations with
opposite signs, and all other port pairs are uncorrelated.  On this state
the two polarization analyzers produce singlet-form statistics,
E = -cos(2(theta_A - theta_B)) at full contrast; a detection channel
(eta, epsilon) applied to all four modes sets the actual contrast.

`analyze` rotates each party's polarization pair by its analyzer angle;
`pair_marginal` and `r_table` extract the second moments and photon
correlations that the CHSH statistics are built from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .correlations import (
    BellAngles,
    BellResult,
    RTable,
    SecondMoments,
    bell_value,
    e_value,
    p_values,
    r_from_moments,
)
from .errors import MomentExtraction
from .gaussian import (
    ChannelParams,
    CovarianceMatrix,
    apply,
    beamsplitter,
    bell_input_state,
    compose,
    cp_map,
    phase_rotation,
    polarization_mixer,
)

# Tolerance separating float dust from genuinely negative photon
# correlations when clamping analytic R values.
R_CLAMP_TOL = 1e-9

# Port labels and their mode slots in the analyzed 4-mode matrix
# (A+, A-, B+, B-).
_A_PORT = {"+": 0, "-": 1}
_B_PORT = {"+": 2, "-": 3}


@dataclass(frozen=True)
class CircuitConfig:
    """Source and channel parameters of one experimental configuration.

    Attributes:
        v_sqz: squeezed input variance (shot-noise units).
        v_asqz: anti-squeezed input variance.
        qwp_phase: extra phase rotation on the A_v port, the waveplate knob
            that compensates a phase mismatch between the polarizations;
            0 in an ideal setup.
        arm_phase: phase accumulated along the second EPR arm before it is
            distributed; the Bell statistics are invariant to it, and the
            knob exists so that invariance can be tested.
        channel: detection efficiency and additive noise applied to all
            four detected modes.
    """

    v_sqz: float
    v_asqz: float
    qwp_phase: float = 0.0
    arm_phase: float = 0.0
    channel: ChannelParams = field(default_factory=lambda: ChannelParams(1.0, 0.0))

    def __post_init__(self) -> None:
        for name in ("v_sqz", "v_asqz", "qwp_phase", "arm_phase"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.v_sqz <= 0.0 or self.v_asqz <= 0.0:
            raise ValueError("variances must be positive")


def build_bell_state(cfg: CircuitConfig, validate: bool = True) -> CovarianceMatrix:
    """Covariance matrix of the four detected modes (A_h, A_v, B_h, B_v).

    Pipeline: squeezed inputs -> pi/2 rotation on the second mode (making
    the squeezings orthogonal) -> 50:50 beamsplitter -> EPR pair; then each
    port takes half of one arm, the opposite-polarization cross blocks keep
    the halved EPR correlations with opposite signs, the qwp phase acts on
    A_v, and the detection channel acts on all four modes.

    Args:
        cfg: source and channel parameters.
        validate: when False, skip the uncertainty-bound check on the input
            variances so a fitter can evaluate unphysical corners; the
            output's `unphysical` flag still reports the result.

    Raises:
        UnphysicalInput: propagated from the input-state check when
            `validate` is True.
    """
    if validate:
        gamma_in = bell_input_state(cfg.v_sqz, cfg.v_asqz)
    else:
        gamma_in = CovarianceMatrix(
            np.diag([cfg.v_sqz, cfg.v_asqz, cfg.v_sqz, cfg.v_asqz, 1, 1, 1, 1])
        )
    source = compose(beamsplitter(0, 1, 4), phase_rotation(1, np.pi / 2.0, 4))
    gamma_src = apply(source, gamma_in)
    if cfg.arm_phase != 0.0:
        gamma_src = apply(phase_rotation(1, cfg.arm_phase, 4), gamma_src)

    v_e1 = gamma_src.entries[0:2, 0:2]
    v_e2 = gamma_src.entries[2:4, 2:4]
    cross = gamma_src.entries[0:2, 2:4]

    eye2 = np.eye(2)
    g = np.zeros((8, 8))
    g[0:2, 0:2] = 0.5 * (v_e1 + eye2)  # A_h
    g[2:4, 2:4] = 0.5 * (v_e2 + eye2)  # A_v
    g[4:6, 4:6] = 0.5 * (v_e1 + eye2)  # B_h
    g[6:8, 6:8] = 0.5 * (v_e2 + eye2)  # B_v
    g[0:2, 6:8] = 0.5 * cross  # A_h -- B_v
    g[6:8, 0:2] = 0.5 * cross.T
    g[2:4, 4:6] = -0.5 * cross.T  # A_v -- B_h
    g[4:6, 2:4] = -0.5 * cross

    gamma4 = CovarianceMatrix(g)
    if cfg.qwp_phase != 0.0:
        gamma4 = apply(phase_rotation(1, cfg.qwp_phase, 4), gamma4)
    return cp_map(gamma4, cfg.channel)


def analyze(
    gamma4: CovarianceMatrix, theta_a: float, theta_b: float
) -> CovarianceMatrix:
    """Rotate each party's polarization pair by its analyzer angle.

    Input modes (A_h, A_v, B_h, B_v) become analyzer ports
    (A+, A-, B+, B-).
    """
    if gamma4.n_modes != 4:
        raise MomentExtraction(f"expected a 4-mode state, got {gamma4.n_modes} modes")
    mixers = compose(
        polarization_mixer(0, 1, theta_a, 4), polarization_mixer(2, 3, theta_b, 4)
    )
    return apply(mixers, gamma4)


def pair_marginal(gamma4: CovarianceMatrix, i: str, j: str) -> SecondMoments:
    """Second moments of one analyzer-port pair from an analyzed state.

    Args:
        gamma4: 4-mode covariance in (A+, A-, B+, B-) order.
        i: A-side port, "+" or "-".
        j: B-side port, "+" or "-".
    """
    if gamma4.n_modes != 4:
        raise MomentExtraction(f"expected a 4-mode state, got {gamma4.n_modes} modes")
    if i not in _A_PORT or j not in _B_PORT:
        raise ValueError(f"port labels must be '+' or '-', got ({i!r}, {j!r})")
    a = 2 * _A_PORT[i]
    b = 2 * _B_PORT[j]
    m = gamma4.entries
    return SecondMoments(
        xx=m[a, b],
        pp=m[a + 1, b + 1],
        xp=m[a, b + 1],
        px=m[a + 1, b],
        va_x=m[a, a],
        va_p=m[a + 1, a + 1],
        vb_x=m[b, b],
        vb_p=m[b + 1, b + 1],
    )


def r_table(gamma_analyzed: CovarianceMatrix) -> RTable:
    """Photon correlations of all four port pairs of an analyzed state.

    Values negative within `R_CLAMP_TOL` are clamped to zero and counted;
    anything more negative is a pipeline bug, not float noise.

    Raises:
        MomentExtraction: on a malformed matrix or an impossible negative
            correlation.
    """
    values = {}
    n_clamped = 0
    for key, (i, j) in (
        ("r_pp", ("+", "+")),
        ("r_mm", ("-", "-")),
        ("r_pm", ("+", "-")),
        ("r_mp", ("-", "+")),
    ):
        r = r_from_moments(pair_marginal(gamma_analyzed, i, j))
        if r < -R_CLAMP_TOL:
            raise MomentExtraction(
                f"photon correlation {key} = {r:.3g} is negative beyond tolerance"
            )
        if r < 0.0:
            r = 0.0
            n_clamped += 1
        values[key] = r
    return RTable(n_clamped=n_clamped, **values)


def bell_for_state(gamma4: CovarianceMatrix, angles: BellAngles) -> BellResult:
    """E values and CHSH combination of a source state at one angle set."""
    e_vals = tuple(
        e_value(r_table(analyze(gamma4, ta, tb))) for ta, tb in angles.pairs()
    )
    return BellResult(e_values=e_vals, b=bell_value(e_vals), angle_set=angles)


def bell_for_config(cfg: CircuitConfig, angles: BellAngles) -> BellResult:
    """Convenience: build the source state, then evaluate the CHSH quantity."""
    return bell_for_state(build_bell_state(cfg), angles)


def fringe(
    cfg: CircuitConfig, theta_a: float, theta_b_grid
) -> dict[str, np.ndarray]:
    """Correlation fringes: P values and E swept over analyzer angle theta_B.

    Returns a column dict with keys theta_b, p_pp, p_mm, p_pm, p_mp, e.

    Raises:
        ValueError: on an empty grid.
        NoPhotons: propagated when the state carries no photons.
    """
    grid = np.asarray(theta_b_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("theta_b_grid must be a non-empty 1-D grid")
    gamma4 = build_bell_state(cfg)
    cols = {k: np.empty(grid.size) for k in ("p_pp", "p_mm", "p_pm", "p_mp", "e")}
    for n, tb in enumerate(grid):
        t = r_table(analyze(gamma4, theta_a, tb))
        cols["p_pp"][n], cols["p_mm"][n], cols["p_pm"][n], cols["p_mp"][n] = p_values(t)
        cols["e"][n] = e_value(t)
    return {"theta_b": grid.copy(), **cols}
