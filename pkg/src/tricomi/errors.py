"""Exception hierarchy shared by all tricomi modules.

Two failure families matter operationally: domain/validation errors
(bad inputs, rejected parameter tuples -> CLI exit 1) and accuracy or
contraction failures (the computation ran but could not certify its
result -> CLI exit 2).
"""


class TricomiError(Exception):
    """Base class for all package errors."""


class DomainError(TricomiError, ValueError):
    """Input outside the documented domain of an operation."""


class AccuracyError(TricomiError, ArithmeticError):
    """A result could not be certified to the requested tolerance.

    Carries whatever partial estimates are available in ``details``.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class UnderflowError(AccuracyError):
    """Requested value lies below the representable range; use the log variant."""


class ContractionError(TricomiError, RuntimeError):
    """A fixed-point loop failed to contract after all allowed shrinks."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
