"""Exception hierarchy.

Every error raised by the library derives from :class:`FracSHEError`.  The
command line maps :class:`ValidationError` subclasses to exit code 1 and
everything else to exit code 2.
"""


class FracSHEError(Exception):
    """Base class for all library errors."""


class ValidationError(FracSHEError, ValueError):
    """An input violates a well-posedness condition.

    ``condition`` names the condition that failed, e.g. ``"(C)"`` or
    ``"alpha"``.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class AlphaOutOfRange(ValidationError):
    def __init__(self, message):
        super().__init__(message, condition="alpha in ]0,2] minus {1}")


class SkewOutOfRange(ValidationError):
    def __init__(self, message):
        super().__init__(message, condition="|delta| <= min(alpha, 2-alpha)")


class SpeedInvalid(ValidationError):
    def __init__(self, message):
        super().__init__(message, condition="speed: lambda -> inf, sqrt(eps)*lambda -> 0")


class IntegrabilityFail(ValidationError):
    def __init__(self, message):
        super().__init__(message, condition="(H_eta^alpha)")


class LipschitzUnbounded(ValidationError):
    def __init__(self, message):
        super().__init__(message, condition="(C)/(D)")


class ParseError(ValidationError):
    """Syntax error in an expression or configuration text."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}, column {column})"
        super().__init__(message + loc, condition="syntax")
        self.line = line
        self.column = column


class MassDefect(FracSHEError):
    """The periodic window is too small for the kernel's tails."""

    def __init__(self, message, required_L=None):
        super().__init__(message)
        self.required_L = required_L


class InterpOutOfRange(FracSHEError):
    pass


class Inconclusive(FracSHEError):
    pass


class Unstable(FracSHEError):
    pass


class GridMismatch(FracSHEError, ValueError):
    pass


class TooFewLags(FracSHEError):
    pass


class DegenerateFunctional(FracSHEError):
    pass


class TailTooRare(FracSHEError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
