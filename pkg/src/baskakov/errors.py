"""Exception hierarchy shared by all modules."""


class BaskakovError(Exception):
    """Base class for errors raised by this package."""


class DomainError(BaskakovError, ValueError):
    """Argument outside the domain of the operation (x < 0, n < 1, ...)."""


class PoleError(BaskakovError, ZeroDivisionError):
    """Evaluation hits a genuine pole, e.g. T_{n,k}(0) for k >= 2."""


class ConvergenceError(BaskakovError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class TruncationError(ConvergenceError):
    """Series truncation needed more terms than the safety cap allows."""
