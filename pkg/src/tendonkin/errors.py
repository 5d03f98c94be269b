"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation (bad shape, range, index)."""


class NumericalError(ArithmeticError):
    """A callback or computation produced a non-finite value."""
