"""Synthetic homodyne records for the four-detector Bell measurement.

Each acquisition block interleaves three record types the way a chopped
measurement would: signal samples drawn from the analyzed four-mode state,
shot-noise samples drawn from vacuum through the same detectors, and a
detector-dark block.  Electronic dark noise is added to the signal and shot
samples, and a slow multiplicative amplifier-gain drift scales all three
records per chop period.  Calibration divides each signal sample by its
period's vacuum deviation, estimated as sqrt(var(shot) - var(dark)), which
removes the electronic floor from the calibration reference and cancels
the gain drift exactly.

All randomness is drawn from counter-based Philox streams keyed by
(seed, angle-pair stream, setting index, record type), so records are
bit-reproducible and statistically independent across blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .correlations import BellAngles
from .circuit import analyze
from .errors import EmptyCalibration, UnphysicalInput
from .gaussian import CovarianceMatrix
from .kernels import normalize_by_period

_QUADRATURES = ("X", "P")

_SIGNAL_QUAD = 0
_SIGNAL_DARK = 1
_SHOT_VAC = 2
_SHOT_DARK = 3
_DARK_BLOCK = 4


@dataclass(frozen=True)
class MeasurementSetting:
    """One joint quadrature choice for the four detectors.

    Attributes:
        id: short label ("S1".."S4").
        quadratures: per-detector quadrature, ordered (A+, A-, B+, B-).
    """

    id: str
    quadratures: tuple[str, str, str, str]

    def __post_init__(self) -> None:
        if len(self.quadratures) != 4 or any(
            q not in _QUADRATURES for q in self.quadratures
        ):
            raise ValueError("quadratures must be four entries drawn from {X, P}")

    @property
    def pattern(self) -> str:
        """The four quadrature letters joined, e.g. "XXPP"."""
        return "".join(self.quadratures)

    def rows(self) -> list[int]:
        """Covariance-matrix row for each detector's chosen quadrature."""
        return [
            2 * det + (0 if q == "X" else 1)
            for det, q in enumerate(self.quadratures)
        ]


def four_settings() -> tuple[MeasurementSetting, ...]:
    """The standard settings: all-X, all-P, and the two mixed splits."""
    return (
        MeasurementSetting("S1", ("X", "X", "X", "X")),
        MeasurementSetting("S2", ("P", "P", "P", "P")),
        MeasurementSetting("S3", ("X", "X", "P", "P")),
        MeasurementSetting("S4", ("P", "P", "X", "X")),
    )


@dataclass(frozen=True)
class NoiseConfig:
    """Detection-chain noise model for record synthesis.

    Attributes:
        dark_clearance_db: shot-to-dark clearance; dark variance in
            shot-noise units is 10**(-clearance/10).
        drift_fraction: relative amplitude of the slow gain drift over the
            record (0 disables it).
        chop_period: samples per chopper period, for both drift and
            calibration.
    """

    dark_clearance_db: float = 17.5
    drift_fraction: float = 0.0
    chop_period: int = 4096

    def __post_init__(self) -> None:
        if not np.isfinite(self.dark_clearance_db) or self.dark_clearance_db <= 0:
            raise ValueError("dark_clearance_db must be finite and > 0")
        if not 0.0 <= self.drift_fraction <= 0.02:
            raise ValueError("drift_fraction must lie in [0, 0.02]")
        if self.chop_period < 2:
            raise ValueError("chop_period must be >= 2")

    @property
    def dark_variance(self) -> float:
        """Dark-noise variance in shot-noise units."""
        return 10.0 ** (-self.dark_clearance_db / 10.0)


@dataclass(frozen=True)
class RecordBlock:
    """Records for one measurement setting.

    Attributes:
        setting: the joint quadrature choice the block was taken at.
        signal: (n, 4) quadrature samples, one column per detector.
        shot: (n, 4) vacuum samples through the same detectors.
        dark: (n, 4) detector-dark samples (diagnostic).
        gain_trace: per-period gain factors applied to signal and shot,
            or None when unknown (e.g. records read back from disk).
        chop_period: samples per chopper period.
        seed: base seed of the run the block belongs to.
        normalized: True once signal has been divided by per-period
            shot-noise deviations.
    """

    setting: MeasurementSetting
    signal: np.ndarray
    shot: np.ndarray
    dark: np.ndarray
    gain_trace: np.ndarray | None
    chop_period: int
    seed: int
    normalized: bool = False

    def __post_init__(self) -> None:
        for name in ("signal", "shot", "dark"):
            arr = getattr(self, name)
            if arr.ndim != 2 or arr.shape[1] != 4:
                raise ValueError(f"{name} must have shape (n, 4)")
            arr.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.signal.shape[0]


@dataclass(frozen=True)
class HomodyneRecordSet:
    """The four setting blocks recorded at one analyzer angle pair.

    Attributes:
        blocks: one RecordBlock per setting, in four_settings() order.
        theta_a: analyzer angle on side A.
        theta_b: analyzer angle on side B.
        seed: base seed of the run.
        stream: angle-pair stream index the records were drawn on.
    """

    blocks: tuple[RecordBlock, ...]
    theta_a: float
    theta_b: float
    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if len(self.blocks) != 4:
            raise ValueError("a record set holds exactly four setting blocks")

    @property
    def normalized(self) -> bool:
        return all(block.normalized for block in self.blocks)

    def block(self, setting_id: str) -> RecordBlock:
        """The block recorded at the setting with the given id."""
        for blk in self.blocks:
            if blk.setting.id == setting_id:
                return blk
        raise KeyError(setting_id)


def _rng(seed: int, stream: int, setting_index: int, code: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, setting_index, code))
    return np.random.Generator(np.random.Philox(ss))


def _gain_factors(n: int, noise: NoiseConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-period gains and their per-row expansion for a block of length n."""
    n_periods = max(1, n // noise.chop_period)
    k = np.arange(n_periods)
    gains = 1.0 + noise.drift_fraction * np.sin(2.0 * np.pi * k / n_periods)
    row_period = np.minimum(np.arange(n) // noise.chop_period, n_periods - 1)
    return gains, gains[row_period]


def sample_block(
    gamma_analyzed: CovarianceMatrix,
    setting: MeasurementSetting,
    n_samples: int,
    noise: NoiseConfig,
    seed: int,
    stream: int = 0,
) -> RecordBlock:
    """Draw one setting's signal, shot, and dark records.

    Args:
        gamma_analyzed: four-mode covariance after the analyzers.
        setting: which quadrature each detector records.
        n_samples: signal samples per detector (shot and dark match).
        noise: detection-chain noise model.
        seed: base seed; sub-streams are derived per record type.
        stream: angle-pair stream index, to decorrelate record sets
            sharing one seed.

    Raises:
        UnphysicalInput: when the state is flagged unphysical.
    """
    if gamma_analyzed.unphysical:
        raise UnphysicalInput("refusing to sample from an unphysical state")
    if gamma_analyzed.n_modes != 4:
        raise ValueError("expected a four-mode analyzed state")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    setting_index = int(setting.id[1:]) - 1
    rows = setting.rows()
    cov = gamma_analyzed.entries[np.ix_(rows, rows)]
    chol = np.linalg.cholesky(cov)
    sigma_dark = np.sqrt(noise.dark_variance)

    signal = _rng(seed, stream, setting_index, _SIGNAL_QUAD).standard_normal(
        (n_samples, 4)
    )
    signal = signal @ chol.T
    signal += sigma_dark * _rng(
        seed, stream, setting_index, _SIGNAL_DARK
    ).standard_normal((n_samples, 4))

    shot = _rng(seed, stream, setting_index, _SHOT_VAC).standard_normal(
        (n_samples, 4)
    )
    shot += sigma_dark * _rng(
        seed, stream, setting_index, _SHOT_DARK
    ).standard_normal((n_samples, 4))

    dark = sigma_dark * _rng(seed, stream, setting_index, _DARK_BLOCK).standard_normal(
        (n_samples, 4)
    )

    gains, row_gain = _gain_factors(n_samples, noise)
    if noise.drift_fraction != 0.0:
        signal *= row_gain[:, None]
        shot *= row_gain[:, None]
        dark *= row_gain[:, None]

    return RecordBlock(
        setting=setting,
        signal=signal,
        shot=shot,
        dark=dark,
        gain_trace=gains,
        chop_period=noise.chop_period,
        seed=seed,
    )


def sample_records(
    gamma_analyzed: CovarianceMatrix,
    theta_a: float,
    theta_b: float,
    n_samples: int,
    noise: NoiseConfig,
    seed: int,
    stream: int = 0,
) -> HomodyneRecordSet:
    """Draw the four setting blocks for one analyzed angle pair."""
    blocks = tuple(
        sample_block(gamma_analyzed, setting, n_samples, noise, seed, stream)
        for setting in four_settings()
    )
    return HomodyneRecordSet(
        blocks=blocks, theta_a=theta_a, theta_b=theta_b, seed=seed, stream=stream
    )


def sample_bell_run(
    gamma4: CovarianceMatrix,
    angles: BellAngles,
    n_samples: int,
    noise: NoiseConfig,
    seed: int,
) -> list[HomodyneRecordSet]:
    """Record sets for all four Bell angle pairs of a prepared state.

    Each pair gets its own RNG stream, so the four record sets are
    statistically independent even though they share one seed.
    """
    runs = []
    for stream, (theta_a, theta_b) in enumerate(angles.pairs()):
        analyzed = analyze(gamma4, theta_a, theta_b)
        runs.append(
            sample_records(analyzed, theta_a, theta_b, n_samples, noise, seed, stream)
        )
    return runs


def calibrate(
    record_set: HomodyneRecordSet,
    shot_scale: np.ndarray | None = None,
    keep_raw: bool = True,
) -> HomodyneRecordSet:
    """Normalize a record set to vacuum-noise units, period by period.

    Args:
        record_set: raw records from `sample_records` or read from disk.
        shot_scale: optional per-detector multiplier on the vacuum
            deviation used for normalization.  1.0 is a faithful
            calibration; anything else deliberately mis-scales that
            detector (see `analysis.spurious_violation_demo`).
        keep_raw: keep the shot and dark arrays on the calibrated blocks;
            pass False to drop them and hold only the normalized signal
            (long records are four times smaller that way).

    Raises:
        EmptyCalibration: when a block has no shot samples.
    """
    if record_set.normalized:
        raise ValueError("record set is already normalized")
    if shot_scale is not None:
        shot_scale = np.asarray(shot_scale, dtype=np.float64)
        if shot_scale.shape != (4,) or np.any(shot_scale <= 0):
            raise ValueError("shot_scale must be four positive factors")

    empty = np.empty((0, 4))
    blocks = []
    for block in record_set.blocks:
        if block.shot.shape[0] == 0:
            raise EmptyCalibration(
                f"block {block.setting.id} has no shot samples"
            )
        normalized, _sigma = normalize_by_period(
            block.signal, block.shot, block.dark, block.chop_period
        )
        if shot_scale is not None:
            normalized = normalized / shot_scale
        blocks.append(
            replace(
                block,
                signal=normalized,
                shot=block.shot if keep_raw else empty.copy(),
                dark=block.dark if keep_raw else empty.copy(),
                normalized=True,
            )
        )
    return replace(record_set, blocks=tuple(blocks))
