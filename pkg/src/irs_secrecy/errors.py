"""Exception hierarchy shared by all modules."""


class IrsSecrecyError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(IrsSecrecyError, ValueError):
    """Matrix deviates from Hermitian symmetry beyond tolerance."""


class NotPositiveDefinite(IrsSecrecyError, ValueError):
    """Cholesky factorization failed."""


class NoConvergence(IrsSecrecyError, RuntimeError):
    """An iteration hit its cap before meeting its stopping rule."""


class BracketInvalid(IrsSecrecyError, ValueError):
    """Bisection target is not bracketed by the end points."""


class IndexOutOfRange(IrsSecrecyError, IndexError):
    """User or eavesdropper index outside the system dimensions."""


class DimensionMismatch(IrsSecrecyError, ValueError):
    """Array shapes are inconsistent with the system dimensions."""


class NegativeInput(IrsSecrecyError, ValueError):
    """A function defined on the non-negative reals received a negative value."""


class SingularSystem(IrsSecrecyError, ValueError):
    """Precoder system matrix is not positive-definite."""


class NonMonotoneError(IrsSecrecyError, RuntimeError):
    """An objective trace decreased by more than the allowed slack."""

    def __init__(self, iteration: int, previous: float, current: float, where: str = "outer loop"):
        self.iteration = iteration
        self.previous = previous
        self.current = current
        self.where = where
        super().__init__(
            f"{where}: objective decreased at iteration {iteration} "
            f"({previous:.15g} -> {current:.15g}, drop {previous - current:.3g})"
        )

    def __reduce__(self):
        return (type(self), (self.iteration, self.previous, self.current, self.where))


class DimensionTooLarge(IrsSecrecyError, ValueError):
    """Brute-force oracle refused an instance that is too large to enumerate."""


class ConfigError(IrsSecrecyError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        self._message = message
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)

    def __reduce__(self):
        return (type(self), (self._message, self.field, self.line))
