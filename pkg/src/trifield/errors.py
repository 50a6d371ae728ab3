"""Exception types raised by the trifield pipeline."""


class TriFieldError(Exception):
    """Base class for all trifield errors.

    ``stage`` is set by the pipeline when an error surfaces during a named
    stage, so callers can report where a run died.
    """

    stage: str | None = None


class ConfigError(TriFieldError):
    """A configuration value violates its documented range."""


class EmptyCloudError(TriFieldError):
    """No usable points remain after input filtering."""


class InvalidNodeIdError(TriFieldError, IndexError):
    """A node index is outside the field."""


class NearVerticalPlaneError(TriFieldError):
    """Plane normal has no usable z-component; height queries are undefined."""


class TooFewPointsError(TriFieldError):
    """Fewer than three points were given to the plane fit."""


class DegenerateCovarianceError(TriFieldError):
    """Point scatter has rank < 2 (collinear or coincident points)."""


class MissingPlaneError(TriFieldError):
    """A node involved in a plane-to-plane test has no fitted plane."""


class NoTerrainNodesError(TriFieldError):
    """No node classified as terrain; seeding is impossible."""


class EmptyNeighborhoodError(TriFieldError):
    """A kernel inference was requested with no contributing nodes."""


class NonpositiveRadiusError(TriFieldError, ValueError):
    """Kernel radius must be positive."""


class VerticalDisplacementError(TriFieldError):
    """Displacement between node means is purely vertical; the pairwise
    normal construction is undefined."""


class NoResolvedCornersError(TriFieldError):
    """Not a single grid corner could be resolved; the field holds no
    terrain model at all."""


class MalformedFileError(TriFieldError):
    """A binary input file has an impossible size for its format."""


class CountMismatchError(TriFieldError):
    """Per-point annotation count does not match the paired scan."""


class PoseParseError(TriFieldError):
    """A pose or calibration line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class SequenceLengthMismatchError(TriFieldError):
    """Scan / label / pose sequences have different lengths."""


class LengthMismatchError(TriFieldError, ValueError):
    """Aligned per-point arrays have different lengths."""
