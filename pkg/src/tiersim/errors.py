"""Exception types shared across the package."""


class TierSimError(Exception):
    """Base class for all package-specific errors."""


class SpecError(TierSimError):
    """A trace generation spec violates one of its constraints."""


class ParseError(TierSimError):
    """A malformed row or token; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class FormatError(TierSimError):
    """Syntactically readable input that violates a structural invariant."""


class IoError(TierSimError):
    """Wraps an underlying OS-level I/O failure."""


class OrderError(TierSimError):
    """Samples were fed to a node out of timestamp order."""


class CalibrationError(TierSimError):
    """Calibration targets are inconsistent or yield negative constants."""


class ComparisonError(TierSimError):
    """A tier comparison is missing a required report."""


class DimError(TierSimError):
    """Input vector length does not match the model dimensions."""


class DataError(TierSimError):
    """A dataset is empty or a trace is too short to window."""


class FrameError(TierSimError):
    """A radio frame buffer is malformed."""


class ValidationError(TierSimError):
    """An entity field violates a length or content rule."""


class IntegrityError(TierSimError):
    """A required foreign key does not resolve."""

    def __init__(self, kind: str, ref):
        super().__init__(f"{kind}: unresolved reference {ref!r}")
        self.kind = kind
        self.ref = ref
