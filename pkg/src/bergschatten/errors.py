"""Exception hierarchy."""


class BergschattenError(Exception):
    """Base class for all package errors."""


class DimensionError(BergschattenError, ValueError):
    """Inputs live in different dimensions."""


class DomainError(BergschattenError, ValueError):
    """An argument lies outside the domain of the operation."""


class IntegrationError(BergschattenError, ArithmeticError):
    """Quadrature produced a non-finite sample."""


class NumericalError(BergschattenError, ArithmeticError):
    """A numerical consistency check failed (conditioning, radicand, SVD)."""


class ResolutionError(BergschattenError, RuntimeError):
    """A discretization would need more resolution than configured."""


class OutOfDepthError(BergschattenError, LookupError):
    """A point lies beyond the constructed depth of a Bergman tree."""


class ConfigError(BergschattenError, ValueError):
    """An experiment configuration violates a precondition."""
