"""Exception hierarchy shared by all modules."""


class UnravelError(Exception):
    """Base class for every error raised by this package."""


class ModelInvalidError(UnravelError, ValueError):
    """A model or state violates a named invariant."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        msg = f"invariant '{invariant}' violated"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class ModelFormatError(UnravelError, ValueError):
    """A model file could not be parsed; carries the offending location."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NumericalDegeneracyError(UnravelError, ArithmeticError):
    """Singular no-jump generator that the dark-state analysis does not explain."""


class TheoremViolationError(UnravelError, ArithmeticError):
    """Dark-state verdict and completeness test disagree (a tolerance problem)."""


class IntegrationError(UnravelError, ArithmeticError):
    """Non-finite values during time propagation."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} (t = {time!r})")


class DegenerateEstimateError(UnravelError, ValueError):
    """An ensemble statistic has no contributing samples."""


class DomainError(UnravelError, ValueError):
    """Argument outside the mathematical domain of an operation."""
