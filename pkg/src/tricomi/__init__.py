"""Numerical toolkit for the semilinear generalized Tricomi equation
d_t^2 u - t^(2l-1) Delta u = f(t, x, u) in mixed-type domains:
degenerate-elliptic and degenerate-hyperbolic propagators, kernel-bound
verification, exponent calculus, and the two-sided Picard solver."""

from .errors import (AccuracyError, ContractionError, DomainError,
                     TricomiError, UnderflowError)

__version__ = "0.1.0"

__all__ = [
    "TricomiError", "DomainError", "AccuracyError", "UnderflowError",
    "ContractionError",
]
