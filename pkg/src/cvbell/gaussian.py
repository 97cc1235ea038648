"""Gaussian states in quadrature phase space and the linear optics acting on them.

States are zero-mean and fully described by a real symmetric covariance matrix
of quadrature second moments.  Conventions, fixed here and used everywhere
else in the package:

* quadratures are X = F + F' and P = i(F' - F), so the vacuum variance is 1
  (shot-noise units) and the mean photon number of a mode is
  (<X^2> + <P^2> - 2) / 4;
* matrix ordering is interleaved, (X1, P1, X2, P2, ...);
* lossless elements act by congruence, gamma -> S gamma S^T, with S
  symplectic: S Omega S^T = Omega.

All values are immutable after construction and every operation is a pure
function, so states and transforms can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnphysicalInput

# Tolerances used throughout: symmetry / symplectic identity at float
# round-off scale, physicality at a looser scale so honest numerical noise
# in symplectic eigenvalues is not flagged.
SYM_TOL = 1e-12
PHYS_TOL = 1e-9


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form for `n_modes` modes in interleaved ordering.

    Block diagonal with one [[0, 1], [-1, 0]] block per mode.
    """
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """A 2N x 2N real symmetric matrix of quadrature second moments.

    Entries are in shot-noise units (vacuum diagonal = 1) with interleaved
    ordering.  The matrix is symmetrized on construction and then frozen;
    asymmetry beyond ``SYM_TOL`` or a non-positive diagonal is rejected.

    Attributes:
        entries: the matrix itself (read-only array).
        unphysical: set by `cp_map` when the output violates the uncertainty
            bound; carried as a flag rather than an error so that iterative
            fitting may evaluate boundary candidates.
        n_modes: number of optical modes N.
    """

    entries: np.ndarray
    unphysical: bool = False
    n_modes: int = field(init=False)

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2:
            raise ValueError(f"covariance matrix must be 2N x 2N, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("covariance matrix entries must be finite")
        if np.max(np.abs(arr - arr.T)) > SYM_TOL:
            raise ValueError("covariance matrix asymmetric beyond tolerance")
        arr = 0.5 * (arr + arr.T)
        if np.any(np.diag(arr) <= 0.0):
            raise ValueError("covariance matrix diagonal must be strictly positive")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "n_modes", arr.shape[0] // 2)

    def block(self, mode_i: int, mode_j: int) -> np.ndarray:
        """2x2 block of second moments between two modes (copy)."""
        a, b = 2 * mode_i, 2 * mode_j
        return np.array(self.entries[a : a + 2, b : b + 2])

    def mean_photon(self, mode: int) -> float:
        """Mean photon number (<X^2> + <P^2> - 2) / 4 of one mode."""
        a = 2 * mode
        return (self.entries[a, a] + self.entries[a + 1, a + 1] - 2.0) / 4.0

    def total_mean_photon(self) -> float:
        """Mean photon number summed over all modes."""
        return sum(self.mean_photon(m) for m in range(self.n_modes))


@dataclass(frozen=True, eq=False)
class SymplecticTransform:
    """A 2N x 2N real matrix S of a lossless element, S Omega S^T = Omega."""

    entries: np.ndarray
    n_modes: int = field(init=False)

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2:
            raise ValueError(f"symplectic matrix must be 2N x 2N, got {arr.shape}")
        n = arr.shape[0] // 2
        om = omega(n)
        if np.max(np.abs(arr @ om @ arr.T - om)) > SYM_TOL:
            raise ValueError("matrix does not satisfy S Omega S^T = Omega")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "n_modes", n)


@dataclass(frozen=True)
class ChannelParams:
    """Efficiency/noise pair of the attenuate-and-add-noise channel.

    Attributes:
        eta: detection efficiency in (0, 1].
        epsilon: additive noise variance >= 0, shot-noise units.
    """

    eta: float
    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.epsilon < 0.0 or not np.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def unphysical(self) -> bool:
        """True when epsilon cannot be explained by loss vacuum alone.

        A channel with epsilon < 1 - eta maps the vacuum below the
        uncertainty bound.
        """
        return self.epsilon < (1.0 - self.eta) - SYM_TOL


def vacuum_state(n_modes: int) -> CovarianceMatrix:
    """Vacuum on `n_modes` modes: the 2N x 2N identity."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return CovarianceMatrix(np.eye(2 * n_modes))


def bell_input_state(v_sqz: float, v_asqz: float) -> CovarianceMatrix:
    """Two X-squeezed modes plus two vacua, as an 8x8 diagonal matrix.

    The diagonal is (v_sqz, v_asqz, v_sqz, v_asqz, 1, 1, 1, 1): both squeezers
    emit X-squeezed light, and quadrature orthogonality is produced later by
    an explicit pi/2 rotation on the second mode.

    Args:
        v_sqz: squeezed quadrature variance, 0 < v_sqz <= 1.
        v_asqz: anti-squeezed quadrature variance, >= 1.

    Raises:
        ValueError: if either variance is outside its range.
        UnphysicalInput: if v_sqz * v_asqz < 1 (uncertainty bound).
    """
    if not 0.0 < v_sqz <= 1.0:
        raise ValueError(f"v_sqz must be in (0, 1], got {v_sqz}")
    if not 1.0 <= v_asqz < np.inf:
        raise ValueError(f"v_asqz must be >= 1, got {v_asqz}")
    if v_sqz * v_asqz < 1.0 - PHYS_TOL:
        raise UnphysicalInput(
            f"v_sqz * v_asqz = {v_sqz * v_asqz:.6g} violates the uncertainty bound"
        )
    return CovarianceMatrix(np.diag([v_sqz, v_asqz, v_sqz, v_asqz, 1, 1, 1, 1]))


def polarization_mixer(
    mode_i: int, mode_j: int, theta: float, n_modes: int
) -> SymplecticTransform:
    """Rotation by theta between two modes, identical on X and P.

    out_i = cos(theta) in_i + sin(theta) in_j,
    out_j = -sin(theta) in_i + cos(theta) in_j.
    """
    if not (0 <= mode_i < n_modes and 0 <= mode_j < n_modes):
        raise IndexError(f"mode index out of range for {n_modes} modes")
    if mode_i == mode_j:
        raise ValueError("mode_i and mode_j must differ")
    s = np.eye(2 * n_modes)
    c, sn = np.cos(theta), np.sin(theta)
    for off in (0, 1):
        a, b = 2 * mode_i + off, 2 * mode_j + off
        s[a, a] = c
        s[a, b] = sn
        s[b, a] = -sn
        s[b, b] = c
    return SymplecticTransform(s)


def beamsplitter(mode_i: int, mode_j: int, n_modes: int) -> SymplecticTransform:
    """50:50 beamsplitter: the theta = pi/4 mode rotation.

    out_i = (in_i + in_j)/sqrt(2), out_j = (in_j - in_i)/sqrt(2), identical on
    X and P.  Applying it twice swaps the pair with a sign flip on mode j, so
    second moments are restored after four applications.
    """
    return polarization_mixer(mode_i, mode_j, np.pi / 4.0, n_modes)


def phase_rotation(mode_i: int, phi: float, n_modes: int) -> SymplecticTransform:
    """Phase-space rotation of one mode.

    X' = cos(phi) X + sin(phi) P, P' = -sin(phi) X + cos(phi) P.  At
    phi = pi/2 the quadratures exchange, which turns an X-squeezed mode into
    a P-squeezed one.
    """
    if not 0 <= mode_i < n_modes:
        raise IndexError(f"mode index out of range for {n_modes} modes")
    s = np.eye(2 * n_modes)
    a = 2 * mode_i
    c, sn = np.cos(phi), np.sin(phi)
    s[a, a] = c
    s[a, a + 1] = sn
    s[a + 1, a] = -sn
    s[a + 1, a + 1] = c
    return SymplecticTransform(s)


def compose(*transforms: SymplecticTransform) -> SymplecticTransform:
    """Compose transforms; the rightmost argument is applied first."""
    if not transforms:
        raise ValueError("compose needs at least one transform")
    n = transforms[0].n_modes
    if any(t.n_modes != n for t in transforms):
        raise ValueError("cannot compose transforms on different mode counts")
    out = transforms[0].entries
    for t in transforms[1:]:
        out = out @ t.entries
    return SymplecticTransform(out)


def apply(s: SymplecticTransform, gamma: CovarianceMatrix) -> CovarianceMatrix:
    """Conjugate a state by a lossless element: gamma -> S gamma S^T."""
    if s.n_modes != gamma.n_modes:
        raise ValueError(
            f"dimension mismatch: transform has {s.n_modes} modes, "
            f"state has {gamma.n_modes}"
        )
    return CovarianceMatrix(
        s.entries @ gamma.entries @ s.entries.T, unphysical=gamma.unphysical
    )


def cp_map(gamma: CovarianceMatrix, ch: ChannelParams) -> CovarianceMatrix:
    """Attenuate-and-add-noise channel: gamma -> eta gamma + epsilon I.

    Never fails; instead the output carries an `unphysical` flag when any
    symplectic eigenvalue drops below 1, so a fitter is free to explore
    boundary parameter values.
    """
    out = ch.eta * gamma.entries + ch.epsilon * np.eye(2 * gamma.n_modes)
    nu_min = np.min(np.abs(np.linalg.eigvals(omega(gamma.n_modes) @ out)))
    return CovarianceMatrix(out, unphysical=bool(nu_min < 1.0 - PHYS_TOL))


def symplectic_eigenvalues(gamma: CovarianceMatrix) -> np.ndarray:
    """Symplectic spectrum: |eigenvalues of i Omega gamma|, N values, descending.

    Physical states have every value >= 1.

    Raises:
        UnphysicalInput: if the matrix is not positive definite.
    """
    if np.min(np.linalg.eigvalsh(gamma.entries)) <= 0.0:
        raise UnphysicalInput("covariance matrix is not positive definite")
    nu = np.abs(np.linalg.eigvals(omega(gamma.n_modes) @ gamma.entries))
    nu.sort()
    return nu[::-2].copy()
