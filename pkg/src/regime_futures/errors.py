"""Exception hierarchy.

Input/validation problems derive from ``ValueError`` (CLI exit code 2);
numerical breakdowns derive from ``NumericalError`` (CLI exit code 3).
"""


class RegimeFuturesError(Exception):
    """Base class for all package errors."""


class InvalidInput(RegimeFuturesError, ValueError):
    """Malformed or inconsistent input."""


class NumericalError(RegimeFuturesError, ArithmeticError):
    """A computation broke down (singular system, unstable scheme, ...)."""


# regime chain
class NonSquare(InvalidInput):
    pass


class NonFinite(InvalidInput):
    pass


class NegativeOffDiagonal(InvalidInput):
    pass


class RowSumNonzero(InvalidInput):
    pass


class MeasureInequivalence(InvalidInput):
    pass


# models / pricing
class RegimeOutOfRange(InvalidInput):
    pass


class TimeBeyondMaturity(InvalidInput):
    pass


class GridTooCoarse(InvalidInput):
    pass


class OutOfGrid(InvalidInput):
    pass


class KappasDiffer(InvalidInput):
    pass


class StepTooLarge(InvalidInput):
    pass


class LengthNotPowerOfTwo(InvalidInput):
    pass


class DegenerateRates(InvalidInput):
    pass


class ConfigInvalid(InvalidInput):
    """Config file problem; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


# numerical failures
class ZeroPivot(NumericalError):
    pass


class UnstableParameters(NumericalError):
    pass


class SingularGamma(NumericalError):
    pass


class DegenerateModel(SingularGamma):
    """Two-regime RS-GBM with mu_1 + sigma_1^2/2 == mu_2 + sigma_2^2/2."""
