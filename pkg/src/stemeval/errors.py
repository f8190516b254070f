"""Exception taxonomy shared by all stemeval modules.

Input and validation problems raise subclasses of :class:`InputError`
(CLI exit code 1); failures of the numerics themselves raise
:class:`NumericalFailureError` (CLI exit code 2).
"""


class StemevalError(Exception):
    """Base class for all errors raised by this package."""


class InputError(StemevalError):
    """Invalid input data or parameters."""


class FormatError(InputError):
    """File content does not match the declared or expected format."""


class ParseError(InputError):
    """File or row could not be decoded (truncation, bad field, ...)."""


class ParameterError(InputError):
    """An argument is outside its documented domain."""


class RangeError(InputError):
    """A position or span lies outside the addressable data."""


class ShortFragmentError(RangeError):
    """Extracted audio fragment is shorter than the minimum duration."""


class SampleRateMismatchError(InputError):
    """Buffers entering one comparison carry different sample rates."""


class DegenerateReferenceError(InputError):
    """The target reference signal has (numerically) zero energy."""


class DependentReferencesError(InputError):
    """Reference signals are linearly dependent; the Gram system is
    too ill-conditioned to solve (condition number above 1e12)."""


class StructuralError(InputError):
    """Rating data violates the page structure (e.g. missing the hidden
    reference or anchor condition)."""


class JoinError(InputError):
    """Ratings reference objective scores that do not exist."""


class UndefinedCorrelationError(InputError):
    """Rank correlation is undefined (all values tied on one side)."""


class NumericalFailureError(StemevalError):
    """A numerical routine produced a result outside its guaranteed
    tolerance (e.g. a strongly negative squared distance)."""
