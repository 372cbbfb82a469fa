"""Exception types shared across the package."""


class LeaError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedDtype(LeaError):
    """Encoding kind is not applicable to the slice's data type."""


class EmptySlice(LeaError):
    """Operation requires at least one row."""


class CorruptPayload(LeaError):
    """Encoded bytes are inconsistent; carries the byte offset of the first
    inconsistency found."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class CacheHookUnavailable(LeaError):
    """No platform hook to invalidate OS caches; caller must fall back to
    modeled storage timings."""


class IntegerOverflow(LeaError):
    """Scaling would leave the signed 64-bit range."""


class MissingProfileEntry(LeaError):
    """Sample profile lacks an entry for the requested encoding."""


class InsufficientData(LeaError):
    """Too few training rows for the requested fit."""


class DimensionMismatch(LeaError):
    """Feature vector length does not match the model."""


class DegenerateDesign(LeaError):
    """Design matrix is rank-deficient beyond what ridge damping can fix."""


class LengthMismatch(LeaError):
    """Paired sequences have different lengths."""


class NegativeThroughput(LeaError):
    """Calibration fit produced a non-physical device model."""


class MissingCoverage(LeaError):
    """Training examples do not cover every applicable (dtype, kind) pair."""


class EmptyProfile(LeaError):
    """Encoding profile has no entries to choose from."""


class MissingMeasuredCost(LeaError):
    """Plan comparison requires measured costs on both plans."""


class ParseError(LeaError):
    """CSV value failed to parse; carries 1-based row and column position."""

    def __init__(self, message: str, row: int, column: int):
        super().__init__(f"{message} (row {row}, column {column})")
        self.row = row
        self.column = column


class SchemaMismatch(LeaError):
    """CSV header does not match the declared schema."""


class InvalidTableFile(LeaError):
    """Container file failed structural validation."""
