"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class NumericalError(ArithmeticError):
    """A factorization or solve failed after all stabilisation attempts."""


class EngineError(RuntimeError):
    """A pricing engine could not complete."""


class ResourceGuardError(MemoryError):
    """A request would exceed the documented memory budget."""
