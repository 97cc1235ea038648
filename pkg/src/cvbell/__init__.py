"""Continuous-variable Bell test simulator.

Builds the four-mode entangled Gaussian state of a polarization Bell source
fed by squeezed light, evaluates photon-number correlations and the CHSH
quantity from quadrature second moments, generates and analyzes synthetic
homodyne records with chopper-style shot-noise calibration, and fits the
(eta, epsilon, v_sqz, v_asqz) covariance model to measured correlation
tables.
"""

__version__ = "0.1.0"

from .analysis import BellEstimate, bootstrap, spurious_violation_demo
from .circuit import (
    BellAngles,
    BellResult,
    ChannelParams,
    CircuitConfig,
    analyze,
    bell_for_config,
    build_bell_state,
    fringe,
    r_table,
)
from .config import RunConfig, config_from_dict
from .correlations import RTable, SecondMoments, bell_value, e_value, visibility
from .errors import (
    ConfigError,
    CvBellError,
    DegenerateData,
    EmptyCalibration,
    MissingSetting,
    MomentExtraction,
    NoPhotons,
    ShortRecord,
    UnphysicalInput,
)
from .fitting import FitResult, fit, predict_r_tables
from .sampler import (
    HomodyneRecordSet,
    NoiseConfig,
    calibrate,
    sample_bell_run,
    sample_records,
)

__all__ = [
    "__version__",
    "BellAngles",
    "BellEstimate",
    "BellResult",
    "ChannelParams",
    "CircuitConfig",
    "ConfigError",
    "CvBellError",
    "DegenerateData",
    "EmptyCalibration",
    "FitResult",
    "HomodyneRecordSet",
    "MissingSetting",
    "MomentExtraction",
    "NoPhotons",
    "NoiseConfig",
    "RTable",
    "RunConfig",
    "SecondMoments",
    "ShortRecord",
    "UnphysicalInput",
    "analyze",
    "bell_for_config",
    "bell_value",
    "bootstrap",
    "build_bell_state",
    "calibrate",
    "config_from_dict",
    "e_value",
    "fit",
    "fringe",
    "predict_r_tables",
    "r_table",
    "sample_bell_run",
    "sample_records",
    "spurious_violation_demo",
    "visibility",
]
