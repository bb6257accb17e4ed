"""Exception types shared across the package.

All validation failures derive from ValueError so callers that only know
numpy idioms can still catch them the usual way. NumericError derives from
ArithmeticError because it signals a computation that produced non-finite
values, not a bad argument.
"""


class FreqVSRError(Exception):
    """Base class for package-specific failures."""


class DimensionError(FreqVSRError, ValueError):
    """Array rank or extent does not match the operation's contract."""


class ParameterError(FreqVSRError, ValueError):
    """Scalar or config argument outside its documented domain."""


class IntegrityError(FreqVSRError, ValueError):
    """Structured inputs disagree with each other (mismatched metadata)."""


class DegenerateInputError(FreqVSRError, ValueError):
    """Operation received an empty collection where at least one item is required."""


class NumericError(FreqVSRError, ArithmeticError):
    """A computation produced NaN or Inf; results must stay finite."""
