"""Exception hierarchy.

Every error raised on purpose by the package derives from `CodispError`.
The CLI maps `InputFormatError` subclasses to exit code 3 and
`NumericalError` subclasses to exit code 4.
"""


class CodispError(Exception):
    """Base class for all package errors."""


class InputFormatError(CodispError, ValueError):
    pass


class NumericalError(CodispError, ArithmeticError):
    pass


# core_grid
class AllMissing(CodispError, ValueError):
    pass


class InvalidWindow(CodispError, ValueError):
    pass


# codispersion
class DimensionMismatch(CodispError, ValueError):
    pass


class LagOutOfRange(CodispError, ValueError):
    pass


class UnknownMark(CodispError, KeyError):
    pass


class MissingBinWidth(CodispError, ValueError):
    pass


# contamination
class InvalidRange(CodispError, ValueError):
    pass


class BlockTooLarge(CodispError, ValueError):
    pass


class GapOutOfBounds(CodispError, ValueError):
    pass


class EmptyResult(CodispError, ValueError):
    pass


# randomfield
class InadmissibleParams(CodispError, ValueError):
    pass


class MethodRequiresEqualParams(CodispError, ValueError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


# ar2d
class SingularSystem(NumericalError):
    pass


class TooFewCells(CodispError, ValueError):
    pass


class KOutOfRange(CodispError, ValueError):
    pass


class GapNotRectangular(CodispError, ValueError):
    pass


class NeighborhoodOutOfBounds(CodispError, ValueError):
    pass


# kriging
class NonPositiveInput(CodispError, ValueError):
    pass


class RankDeficient(NumericalError):
    pass


class TooFewBins(CodispError, ValueError):
    pass


class DegenerateFit(NumericalError):
    pass


class SingularKrigingSystem(NumericalError):
    pass


class DuplicatePointsWithZeroNugget(CodispError, ValueError):
    pass


# io
class MalformedHeader(InputFormatError):
    pass


class ValueOutOfRange(InputFormatError):
    pass


class RaggedRows(InputFormatError):
    pass


class UnparsableToken(InputFormatError):
    pass


class MissingColumn(InputFormatError):
    pass


class NonNumeric(InputFormatError):
    pass
