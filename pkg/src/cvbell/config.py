"""Run configuration: user-facing knobs and their derived model parameters.

A run is specified in experiment units -- squeezing in dB, source purity,
detection efficiency, dark clearance in dB -- and converted here to the
variances and channel parameters the state builder consumes.  Parsing from
JSON dictionaries is strict: unknown keys and out-of-range values raise
ConfigError rather than being silently dropped.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from .correlations import BellAngles
from .circuit import CircuitConfig
from .errors import ConfigError
from .gaussian import ChannelParams
from .sampler import NoiseConfig

_ANGLE_KEYS = ("theta_a", "theta_a_prime", "theta_b", "theta_b_prime")


@dataclass(frozen=True)
class RunConfig:
    """All knobs of a simulated run.

    Attributes:
        squeezing_db: input squeezing strength; the squeezed quadrature
            variance is 10**(-squeezing_db/10).
        purity: source purity; the antisqueezed variance is
            1 / (purity**2 * v_sqz), so purity 1 is a minimum-uncertainty
            source.
        eta: detection efficiency in (0, 1].
        dark_clearance_db: shot-to-dark clearance of the detectors.
        epsilon: optional override of the channel's added-noise variance;
            None selects the physical default (1 - eta) + dark variance.
        angles: the four analyzer angles of the Bell measurement.
        n_samples: quadrature samples per setting block.
        n_boot: bootstrap replicates for uncertainty estimates.
        seed: base seed for all record synthesis and resampling.
        chop_period: samples per chopper period (drift and calibration).
        drift_fraction: relative amplitude of slow gain drift.
        qwp_phase: residual waveplate phase on the A_v mode.
        arm_phase: source-arm phase offset (a physically inert knob the
            correlations are invariant under).
    """

    squeezing_db: float = 1.1
    purity: float = 0.98
    eta: float = 0.95
    dark_clearance_db: float = 17.5
    epsilon: float | None = None
    angles: BellAngles = field(default_factory=BellAngles.canonical)
    n_samples: int = 100_000
    n_boot: int = 200
    seed: int = 12345
    chop_period: int = 4096
    drift_fraction: float = 0.01
    qwp_phase: float = 0.0
    arm_phase: float = 0.0

    def __post_init__(self) -> None:
        checks = [
            ("squeezing_db", self.squeezing_db >= 0.0),
            ("purity", 0.0 < self.purity <= 1.0),
            ("eta", 0.0 < self.eta <= 1.0),
            ("dark_clearance_db", self.dark_clearance_db > 0.0),
            ("epsilon", self.epsilon is None or self.epsilon >= 0.0),
            ("n_samples", self.n_samples >= 1),
            ("n_boot", self.n_boot >= 2),
            ("seed", 0 <= self.seed < 2**64),
            ("chop_period", self.chop_period >= 2),
            ("drift_fraction", 0.0 <= self.drift_fraction <= 0.02),
            ("qwp_phase", math.isfinite(self.qwp_phase)),
            ("arm_phase", math.isfinite(self.arm_phase)),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(
                    f"{name} = {getattr(self, name)!r} is out of range"
                )
        for name in ("squeezing_db", "purity", "eta", "dark_clearance_db"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def v_sqz(self) -> float:
        """Squeezed quadrature variance (vacuum = 1)."""
        return 10.0 ** (-self.squeezing_db / 10.0)

    @property
    def v_asqz(self) -> float:
        """Antisqueezed quadrature variance implied by the purity."""
        return 1.0 / (self.purity**2 * self.v_sqz)

    @property
    def dark_variance(self) -> float:
        """Dark-noise variance in shot-noise units."""
        return 10.0 ** (-self.dark_clearance_db / 10.0)

    @property
    def effective_epsilon(self) -> float:
        """Channel added noise: the override, or (1 - eta) + dark variance."""
        if self.epsilon is not None:
            return self.epsilon
        return (1.0 - self.eta) + self.dark_variance

    def channel(self) -> ChannelParams:
        return ChannelParams(eta=self.eta, epsilon=self.effective_epsilon)

    def circuit_config(self) -> CircuitConfig:
        """Source and channel parameters for the state builder."""
        return CircuitConfig(
            v_sqz=self.v_sqz,
            v_asqz=self.v_asqz,
            qwp_phase=self.qwp_phase,
            arm_phase=self.arm_phase,
            channel=self.channel(),
        )

    def sampling_circuit_config(self) -> CircuitConfig:
        """Like `circuit_config`, but without the dark-noise term.

        Record synthesis adds dark noise sample by sample, so the state
        the sampler draws quadratures from must carry only the loss part
        of the channel; using the full epsilon there would double-count
        the dark variance.  An epsilon override smaller than the dark
        variance cannot be realized by records (the dark block always
        contributes fully), so synthesized noise is floored there.
        """
        eps_loss = max(self.effective_epsilon - self.dark_variance, 0.0)
        return CircuitConfig(
            v_sqz=self.v_sqz,
            v_asqz=self.v_asqz,
            qwp_phase=self.qwp_phase,
            arm_phase=self.arm_phase,
            channel=ChannelParams(eta=self.eta, epsilon=eps_loss),
        )

    def noise_config(self) -> NoiseConfig:
        """Detection-chain noise model for record synthesis."""
        return NoiseConfig(
            dark_clearance_db=self.dark_clearance_db,
            drift_fraction=self.drift_fraction,
            chop_period=self.chop_period,
        )

    def to_dict(self) -> dict:
        """JSON-ready dictionary (angles nested under their own key)."""
        out = asdict(self)
        out["angles"] = {k: getattr(self.angles, k) for k in _ANGLE_KEYS}
        return out

    def replace(self, **kwargs) -> "RunConfig":
        """A copy with the given fields replaced (validation re-runs)."""
        return replace(self, **kwargs)


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a parsed JSON dictionary, strictly.

    Raises:
        ConfigError: on unknown keys, wrong types, or out-of-range values.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    kwargs = dict(data)
    if "angles" in kwargs and kwargs["angles"] is not None:
        angles_raw = kwargs["angles"]
        if not isinstance(angles_raw, dict):
            raise ConfigError("angles must be an object with the four theta keys")
        unknown_angles = set(angles_raw) - set(_ANGLE_KEYS)
        if unknown_angles:
            raise ConfigError(
                f"unknown angle keys: {', '.join(sorted(unknown_angles))}"
            )
        missing = set(_ANGLE_KEYS) - set(angles_raw)
        if missing:
            raise ConfigError(f"missing angle keys: {', '.join(sorted(missing))}")
        try:
            kwargs["angles"] = BellAngles(
                **{k: float(angles_raw[k]) for k in _ANGLE_KEYS}
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad angles: {exc}") from exc

    for name, value in list(kwargs.items()):
        if name == "angles":
            continue
        field_type = RunConfig.__dataclass_fields__[name].type
        try:
            if name in ("n_samples", "n_boot", "seed", "chop_period"):
                if isinstance(value, float) and not value.is_integer():
                    raise ConfigError(f"{name} must be an integer")
                kwargs[name] = int(value)
            elif name == "epsilon" and value is None:
                kwargs[name] = None
            else:
                kwargs[name] = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"{name} = {value!r} cannot be parsed as {field_type}"
            ) from exc

    return RunConfig(**kwargs)
