"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """Arguments are individually valid but inconsistent with each other."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to converge or lost its guarantees."""
