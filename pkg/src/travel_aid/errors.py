"""Exception hierarchy shared across the package."""


class TravelAidError(Exception):
    """Base class for all package errors."""


class GeometryError(TravelAidError, ValueError):
    """Inconsistent frame/intrinsics dimensions or a point that cannot be projected."""


class GroundFitError(TravelAidError):
    """Ground detection could not produce a plane (too few points, degenerate data)."""


class DegenerateHistogram(GroundFitError):
    """All heights fall into a single histogram bin."""


class FusionError(TravelAidError, ValueError):
    """A detection or contour cannot be localized in the depth frame."""


class DetectionFormatError(TravelAidError, ValueError):
    """A detection record is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DetectorError(TravelAidError):
    """Base class for remote detector failures."""


class DetectorTimeout(DetectorError):
    pass


class DetectorTransportError(DetectorError):
    pass


class MalformedResponse(DetectorError):
    pass


class ConfigError(TravelAidError, ValueError):
    """Invalid configuration value; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class SceneError(TravelAidError, ValueError):
    """Synthetic scene specification that cannot be rendered."""
