"""Exception hierarchy.

Every error raised by the library derives from :class:`GridGWError`, so
callers (and the command line front-end) can catch one type and report the
concrete class name as a machine-readable code.
"""


class GridGWError(ValueError):
    """Base class for all library errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# measures and plans
class NegativeWeight(GridGWError):
    pass


class WrongLength(GridGWError):
    pass


class NotNormalized(GridGWError):
    pass


class NegativeEntry(GridGWError):
    pass


# fast multiply
class EmptyInput(GridGWError):
    pass


class LengthMismatch(GridGWError):
    pass


class DimensionMismatch(GridGWError):
    pass


class NotSquareGrid(GridGWError):
    pass


class TooLargeToMaterialize(GridGWError):
    pass


# gradient and solvers
class ThetaOutOfRange(GridGWError):
    pass


class NonFiniteCost(GridGWError):
    pass


class NumericalOverflow(GridGWError, ArithmeticError):
    pass


class ConfigInvalid(GridGWError):
    pass


# experiments and I/O
class OverlappingHumps(GridGWError):
    pass


class FileNotFound(GridGWError, FileNotFoundError):
    pass


class UnsupportedFormat(GridGWError):
    pass


class ZeroMassImage(GridGWError):
    pass


class NaiveTooLarge(GridGWError):
    pass
