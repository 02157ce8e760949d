"""Exception types raised across the tremorid pipeline."""


class TremorError(Exception):
    """Base class for all pipeline errors."""


class ParseError(TremorError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ValidationError(TremorError, ValueError):
    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        msg = invariant if not detail else f"{invariant}: {detail}"
        super().__init__(msg)


class TooShort(TremorError, ValueError):
    pass


class LengthError(TremorError, ValueError):
    pass


class DivergenceError(TremorError, ArithmeticError):
    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class DegenerateSpectrum(TremorError, ValueError):
    pass


class MetadataMismatch(TremorError, ValueError):
    pass


class EmptyData(TremorError, ValueError):
    pass


class DimensionMismatch(TremorError, ValueError):
    pass


class FormatError(TremorError, ValueError):
    pass


class VersionError(FormatError):
    pass


class InsufficientSessions(TremorError, ValueError):
    def __init__(self, subject):
        self.subject = subject
        super().__init__(f"subject {subject!r} needs at least 2 distinct session dates")


class UnknownLabel(TremorError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


def with_context(exc: BaseException, prefix: str) -> BaseException:
    """Copy of ``exc`` (same type and attributes) with ``prefix`` on its message."""
    new = type(exc).__new__(type(exc))
    new.__dict__.update(exc.__dict__)
    new.args = (f"{prefix}: {exc}",)
    return new
