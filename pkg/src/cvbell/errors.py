"""Exception types shared across the package."""


class CvBellError(Exception):
    """Base class for all package-specific errors."""


class UnphysicalInput(CvBellError):
    """State parameters violate the uncertainty bound or positivity."""


class MomentExtraction(CvBellError):
    """A covariance matrix handed to the correlation pipeline is malformed."""


class NoPhotons(CvBellError):
    """Every photon-correlation value vanished; normalized quantities are 0/0."""


class FitDegenerate(CvBellError):
    """A fringe fit has no usable offset, so visibility is undefined."""


class EmptyCalibration(CvBellError):
    """A record block has no shot-noise samples to normalize against."""


class MissingSetting(CvBellError):
    """The four measurement settings do not cover every required moment."""


class ShortRecord(CvBellError):
    """A record block is too short for moment estimation."""


class DegenerateData(CvBellError):
    """Fit input carries no information (all correlation values equal)."""


class ConfigError(CvBellError):
    """A run configuration is invalid or contains unknown fields."""
