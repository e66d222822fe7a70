"""Exception types raised across the package."""


class ScanCleanError(Exception):
    """Base class for all scanclean errors."""


class EmptyInputError(ScanCleanError, ValueError):
    """An operation received an empty cloud, list, or file where data is required."""


class EmptyProjectionError(ScanCleanError, ValueError):
    """No point of the input cloud landed inside the sensor's field of view."""


class ZeroSeparationError(ScanCleanError, ValueError):
    """Beam angle requested between a pixel and itself."""


class InvalidDepthError(ScanCleanError, ValueError):
    """A depth value that must be positive was zero or negative."""


class InvalidInputError(ScanCleanError, ValueError):
    """A parameter fell outside its documented domain."""


class ShapeMismatchError(ScanCleanError, ValueError):
    """Two grids that must share a shape do not."""


class TooFewPointsError(ScanCleanError, ValueError):
    """A neighborhood has fewer points than the minimum needed for a plane fit."""


class DegenerateNeighborhoodError(ScanCleanError, ValueError):
    """Neighborhood covariance has rank < 2; no plane normal is defined."""


class InsufficientFeaturesError(ScanCleanError, ValueError):
    """Too few normal features to estimate a scene degeneration degree."""


class LengthMismatchError(ScanCleanError, ValueError):
    """Paired trajectories differ in length."""


class FormatError(ScanCleanError, ValueError):
    """A file does not conform to its declared format; carries a byte/line position."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class InvalidSceneError(ScanCleanError, ValueError):
    """Synthetic scene geometry is degenerate (e.g. the sensor sits inside a solid)."""
