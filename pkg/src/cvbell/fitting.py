"""Least-squares fit of the source/channel model to coincidence tables.

The forward model maps (eta, epsilon, v_sqz, v_asqz) through the full
state-construction and analysis pipeline to the four coincidence tables,
and the fit minimizes the summed squared difference to measured tables
with a bound-respecting reparametrization and a multi-start simplex
search.

Identifiability caveat -- documented, not fixable by the optimizer: the
coincidence tables of this model depend on the four parameters only
through two combinations, the EPR cross-correlation k = eta*(v_asqz -
v_sqz)/4 and the per-port mean photon number n' = (eta*((v_sqz +
v_asqz)/2 + 1)/2 + epsilon - 1)/2.  The Jacobian of the 16 predicted
values therefore has rank 2 everywhere, and the two remaining parameter
directions are fixed by the initial guess alone.  A round trip that
starts from the generating parameters reproduces them exactly; a fit
from an uninformed start recovers k**2 and n'**2 (the tables are even in
n') but distributes them over (eta, epsilon, v_sqz, v_asqz) according to
where the start landed on the solution manifold.  Supply `init` from an
independent calibration when single-parameter values matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .circuit import CircuitConfig, analyze, build_bell_state, r_table
from .correlations import RTable
from .errors import DegenerateData
from .gaussian import ChannelParams

#: Uninformed starting point used when no initial guess is supplied.
DEFAULT_INIT = (0.9, 0.05, 0.8, 1.3)

N_STARTS = 9
MAX_ITER_PER_START = 500
DEGENERATE_SPREAD = 1e-14
#: A start whose residual falls to numerical zero ends the multi-start
#: search early; no later start can beat it by more than the tie tolerance.
ZERO_RESIDUAL = 1e-24
_PHYS_TOL = 1e-9
_ETA_MAX = 1.0 - 1e-12
_ETA_MIN = 1e-9
_EPS_MIN = 1e-12
_LOGV_MIN = 1e-12


def _softplus(x: float | np.ndarray) -> float | np.ndarray:
    return np.logaddexp(0.0, x)


def _softplus_inv(y: float) -> float:
    # exact inverse of log(1 + e^x); y must be > 0
    return float(y + np.log(-np.expm1(-y))) if y < 30.0 else float(y)


def _params_from_z(z: np.ndarray) -> tuple[float, float, float, float]:
    """Map unconstrained coordinates to in-bounds model parameters."""
    eta = float(expit(z[0]))
    epsilon = float(_softplus(z[1]))
    v_sqz = float(np.exp(-_softplus(z[2])))
    v_asqz = float(np.exp(_softplus(z[3])))
    return eta, epsilon, v_sqz, v_asqz


def _z_from_params(eta: float, epsilon: float, v_sqz: float, v_asqz: float) -> np.ndarray:
    """Inverse of `_params_from_z`, clipping onto the open bound set."""
    eta = min(max(eta, _ETA_MIN), _ETA_MAX)
    epsilon = max(epsilon, _EPS_MIN)
    log_vs = max(-np.log(v_sqz), _LOGV_MIN)
    log_va = max(np.log(v_asqz), _LOGV_MIN)
    return np.array(
        [
            logit(eta),
            _softplus_inv(epsilon),
            _softplus_inv(log_vs),
            _softplus_inv(log_va),
        ]
    )


def predict_r_tables(
    params, angle_pairs
) -> list[RTable]:
    """Forward model: coincidence tables for each analyzer angle pair.

    Args:
        params: (eta, epsilon, v_sqz, v_asqz).
        angle_pairs: iterable of (theta_a, theta_b).
    """
    eta, epsilon, v_sqz, v_asqz = (float(p) for p in params)
    cfg = CircuitConfig(
        v_sqz=v_sqz, v_asqz=v_asqz, channel=ChannelParams(eta, epsilon)
    )
    gamma4 = build_bell_state(cfg, validate=False)
    return [r_table(analyze(gamma4, ta, tb)) for ta, tb in angle_pairs]


@dataclass(frozen=True)
class FitResult:
    """Recovered model parameters and fit diagnostics.

    Attributes:
        eta, epsilon, v_sqz, v_asqz: fitted parameters, in bounds exactly.
        residual: summed squared table difference at the solution.
        converged: whether the winning start's simplex met its tolerances
            within the iteration budget (False reports best-so-far).
        physical: True when the channel adds at least the vacuum noise its
            loss requires and the input saturates the uncertainty bound,
            i.e. epsilon >= 1 - eta and v_sqz * v_asqz >= 1 (tolerance
            1e-9).
        inferred_squeezing_db: -10*log10(v_sqz).
        n_iter: simplex iterations summed over all starts.
        best_start: index of the winning start (0 is the supplied init).
        trace: best objective value per iteration of the winning start,
            when requested.
    """

    eta: float
    epsilon: float
    v_sqz: float
    v_asqz: float
    residual: float
    converged: bool
    physical: bool
    inferred_squeezing_db: float
    n_iter: int
    best_start: int
    trace: tuple[float, ...] | None = None


def inferred_squeezing_db(fit: FitResult) -> float:
    """Input squeezing in dB implied by the fitted squeezed variance."""
    return -10.0 * np.log10(fit.v_sqz)


def fit(
    measured,
    init=None,
    record_trace: bool = False,
) -> FitResult:
    """Fit (eta, epsilon, v_sqz, v_asqz) to measured coincidence tables.

    Args:
        measured: sequence of ((theta_a, theta_b), RTable) pairs; at least
            four pairs (16 values) are required.
        init: optional (eta, epsilon, v_sqz, v_asqz) starting point;
            defaults to DEFAULT_INIT.  Eight additional perturbed starts
            guard against a bad simplex path.
        record_trace: keep the winning start's per-iteration best
            objective values on the result.

    Returns:
        FitResult; `converged` is False when the winning start exhausted
        its iteration budget (best-so-far parameters are still reported).

    Raises:
        ValueError: on fewer than four angle pairs.
        DegenerateData: when the measured values are all equal (no
            structure to fit).
    """
    measured = list(measured)
    if len(measured) < 4:
        raise ValueError("need at least four angle pairs (16 table values)")
    angle_pairs = [tuple(pair) for pair, _table in measured]
    target = np.array([t.values() for _pair, t in measured])
    if np.ptp(target) < DEGENERATE_SPREAD:
        raise DegenerateData(
            "measured tables are constant; the model cannot be identified"
        )

    def objective(z: np.ndarray) -> float:
        predicted = predict_r_tables(_params_from_z(z), angle_pairs)
        pred = np.array([t.values() for t in predicted])
        delta = pred - target
        return float(np.sum(delta * delta))

    z0 = _z_from_params(*(init if init is not None else DEFAULT_INIT))
    rng = np.random.default_rng(20240)
    starts = [z0]
    for _ in range(N_STARTS - 1):
        starts.append(z0 + 0.15 * (1.0 + np.abs(z0)) * rng.standard_normal(4))

    candidates = []
    n_iter_total = 0
    for index, z_start in enumerate(starts):
        trace: list[float] = []
        callback = (lambda xk: trace.append(objective(xk))) if record_trace else None
        res = minimize(
            objective,
            z_start,
            method="Nelder-Mead",
            callback=callback,
            options={
                "maxiter": MAX_ITER_PER_START,
                "xatol": 1e-10,
                "fatol": 1e-14,
            },
        )
        n_iter_total += int(res.nit)
        candidates.append((float(res.fun), index, res, tuple(trace)))
        if float(res.fun) <= ZERO_RESIDUAL:
            break

    best_fun = min(c[0] for c in candidates)
    tie_tol = max(1e-18, 1e-9 * best_fun)
    winner = min(
        (c for c in candidates if c[0] <= best_fun + tie_tol), key=lambda c: c[1]
    )
    fun, best_start, res, trace_tuple = winner

    eta, epsilon, v_sqz, v_asqz = _params_from_z(res.x)
    physical = (
        epsilon >= (1.0 - eta) - _PHYS_TOL and v_sqz * v_asqz >= 1.0 - _PHYS_TOL
    )
    return FitResult(
        eta=eta,
        epsilon=epsilon,
        v_sqz=v_sqz,
        v_asqz=v_asqz,
        residual=fun,
        converged=bool(res.success),
        physical=physical,
        inferred_squeezing_db=-10.0 * float(np.log10(v_sqz)),
        n_iter=n_iter_total,
        best_start=best_start,
        trace=trace_tuple if record_trace else None,
    )
