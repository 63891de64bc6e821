"""Numerical solvers for generalized Riemann-Hilbert problems and their parameter families."""

from .errors import GenRHError

__version__ = "0.1.0"
__all__ = ["GenRHError", "__version__"]
