"""Numerical toolkit for Schatten-class commutators on weighted Bergman spaces.

Subpackages mirror the build: ``geometry`` (ball geometry), ``quadrature``
(integration against dv_gamma and dtau), ``symbols`` and ``kernels``
(Berezin transform, mean oscillation), ``tree`` (Bergman tree), ``operators``
(n = 1 matrix models) and ``experiments`` (drivers and reports).
"""

from .errors import (
    BergschattenError,
    ConfigError,
    DimensionError,
    DomainError,
    IntegrationError,
    NumericalError,
    OutOfDepthError,
    ResolutionError,
)

__version__ = "0.1.0"

__all__ = [
    "BergschattenError",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "IntegrationError",
    "NumericalError",
    "OutOfDepthError",
    "ResolutionError",
]
