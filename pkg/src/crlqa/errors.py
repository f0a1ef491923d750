"""Exception hierarchy shared by all crlqa modules."""


class CrlqaError(Exception):
    """Base class for every error raised by crlqa."""


class DecodeError(CrlqaError):
    """A file could not be decoded in the expected format."""


class LabelError(CrlqaError, ValueError):
    """A mask holds a label outside {0, 1, 2, 3}."""


class DimensionMismatch(CrlqaError, ValueError):
    """Frame and mask sizes disagree."""


class MissingStructure(CrlqaError):
    """Head or body region is absent from the mask."""


class NoJunction(CrlqaError):
    """Head and body regions never touch."""


class DegenerateGeometry(CrlqaError):
    """Landmarks coincide or crown/rump cannot be told apart."""


class Unevaluable(CrlqaError):
    """A criterion cannot be evaluated with the available inputs."""


class GeometryInfeasible(CrlqaError, ValueError):
    """A phantom configuration cannot be rendered inside the image."""


class PairingError(CrlqaError, ValueError):
    """Two rater tables do not cover the same image ids."""


class DegenerateMarginals(CrlqaError):
    """Chance agreement is 1, so kappa is undefined."""


class ZeroVariance(CrlqaError):
    """Total score variance is zero, so Cronbach's alpha is undefined."""
