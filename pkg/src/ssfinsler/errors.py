"""Exception hierarchy shared by every module."""


class FinslerError(Exception):
    """Base class for all errors raised by ssfinsler."""


class ShapeError(FinslerError):
    """Jet shapes or bases are incompatible, or a requested order is not retained."""


class JetDivisionError(FinslerError, ZeroDivisionError):
    """Division by a jet whose constant term is (numerically) zero."""

    def __init__(self, value: float, epsilon: float):
        super().__init__(f"jet division by near-zero constant term {value!r} (|.| <= {epsilon:g})")
        self.value = value
        self.epsilon = epsilon


class DomainError(FinslerError, ValueError):
    """A point lies outside the domain of a function or model."""


class SingularMetricError(DomainError):
    """A denominator of the metric, its inverse or the spray vanishes."""


class ParseError(FinslerError, ValueError):
    """Malformed metric expression; carries the offending source span."""

    def __init__(self, message: str, span: tuple[int, int], source: str = ""):
        self.message = message
        self.span = span
        self.source = source
        super().__init__(self._format())

    def _format(self) -> str:
        start, end = self.span
        text = f"{self.message} at {start}:{end}"
        if self.source:
            caret = " " * start + "^" * max(1, end - start)
            text += f"\n  {self.source}\n  {caret}"
        return text


class FitError(FinslerError):
    """Least-squares family fit is ill-posed (rank-deficient design)."""
