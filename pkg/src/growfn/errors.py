"""Exception types shared across the package."""


class GrowfnError(Exception):
    """Base class for all package errors."""


class ParameterError(GrowfnError, ValueError):
    """A caller-supplied parameter is outside its admissible range."""


class FormatError(GrowfnError, ValueError):
    """An input file does not match the expected layout."""


class ParseError(FormatError):
    """A cell failed numeric parsing; carries row/column context."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateSeriesError(GrowfnError, ValueError):
    """A series cannot be standardized (zero variance or too few points)."""


class NumericError(GrowfnError, RuntimeError):
    """A numerical operation failed (factorization, overflow, ...)."""


class DegenerateLikelihoodError(NumericError):
    """All candidate likelihoods were zero; assignment weights undefined."""
