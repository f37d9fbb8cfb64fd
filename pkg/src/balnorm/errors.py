"""Exception types raised across the package."""


class BalnormError(Exception):
    """Base class for all package errors."""


class TransitionTooLarge(BalnormError, ValueError):
    pass


class BadCellCount(BalnormError, ValueError):
    pass


class NonMonotonePhi(BalnormError, ValueError):
    pass


class IndexOutOfRange(BalnormError, IndexError):
    pass


class TooFewPoints(BalnormError, ValueError):
    pass


class UnsupportedOrder(BalnormError, ValueError):
    pass


class BadEpsilon(BalnormError, ValueError):
    pass


class IncompatibleBasis(BalnormError, ValueError):
    pass


class QuadratureUnderflow(BalnormError, ArithmeticError):
    pass


class NotSPD(BalnormError, ArithmeticError):
    pass


class ResidualTooLarge(BalnormError, ArithmeticError):
    pass


class MissingDerivative(BalnormError, ValueError):
    pass


class NotPlyCell(BalnormError, ValueError):
    pass


class MissingDecomposition(BalnormError, ValueError):
    pass


class RegionMeshMismatch(BalnormError, ValueError):
    pass


class NonPositiveError(BalnormError, ValueError):
    pass


class NotEnoughPoints(BalnormError, ValueError):
    pass


class ConfigError(BalnormError, ValueError):
    pass
