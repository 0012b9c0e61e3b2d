"""Exception hierarchy shared by all rsgeom modules."""


class RsGeomError(Exception):
    """Base class for every error raised by rsgeom."""


class QueryOutOfRange(RsGeomError):
    pass


class InsufficientSamples(RsGeomError):
    pass


class BehindCamera(RsGeomError):
    pass


class NonPositiveDepth(RsGeomError):
    pass


class NegativeDepth(RsGeomError):
    pass


class OutOfBounds(RsGeomError):
    pass


class DimensionMismatch(RsGeomError):
    pass


class EmptyOverlap(RsGeomError):
    pass


class DegenerateRays(RsGeomError):
    pass


class AlreadyInCameraFrame(RsGeomError):
    pass


class CoverageGap(RsGeomError):
    pass


class LengthMismatch(RsGeomError):
    pass


class DegenerateGeometry(RsGeomError):
    pass


class FormatError(RsGeomError):
    """A file on disk does not match the expected layout."""
