"""Exception types shared across the package."""


class ModelError(ValueError):
    """Base class for all errors raised by this package."""


class ParameterError(ModelError):
    """A parameter violates its declared constraints (e.g. 1 < C < B)."""


class DomainError(ModelError):
    """A numerical evaluation left the representable domain (overflow, non-finite)."""


class StencilError(ModelError):
    """A finite-difference stencil straddles a breakpoint of a piecewise function."""


class UndefinedCorrelationError(ModelError):
    """A correlation was requested where one of the variances is zero."""


class LoadError(ModelError):
    """Input data could not be read or parsed."""
