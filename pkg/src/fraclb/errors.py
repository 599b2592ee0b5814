"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridMismatchError(ValueError):
    """Two objects that must share a quadrature grid do not."""


class ConvergenceError(RuntimeError):
    """A quadrature or series failed to reach its stated tolerance."""


class PrecisionWarning(UserWarning):
    """Result is finite but may have lost most of its significant digits."""
