"""Exception hierarchy shared by every seglink module."""


class SegLinkError(Exception):
    """Base class for all seglink errors."""


class ParseError(SegLinkError, ValueError):
    """A text input line could not be parsed."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class FormatError(SegLinkError, ValueError):
    """Structurally inconsistent input (e.g. ragged feature rows)."""


class BoundsError(SegLinkError, IndexError):
    pass


class InvalidPairError(SegLinkError, ValueError):
    pass


class InvalidInputError(SegLinkError, ValueError):
    pass


class ShapeError(SegLinkError, ValueError):
    pass


class NumericError(SegLinkError, ArithmeticError):
    """A non-finite value appeared during a forward pass or training."""


class DeterminismError(SegLinkError, RuntimeError):
    pass


class SaturationError(SegLinkError, RuntimeError):
    """Negative sampling cannot find enough non-edges."""


class PathLimitError(SegLinkError, RuntimeError):
    """Simple-path enumeration exceeded its hard cap."""
