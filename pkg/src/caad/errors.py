"""Shared exception types for pipeline contract violations."""


class EmptyInput(ValueError):
    """An operation received an empty stream, batch, or record set."""


class CorruptInput(ValueError):
    """Too many malformed records to proceed; carries line diagnostics."""

    def __init__(self, message, bad_lines=None):
        super().__init__(message)
        self.bad_lines = bad_lines or []


class DegenerateStats(ValueError):
    """Normalization statistics with max == min."""


class SplitOverlap(ValueError):
    """Train/val/test windows are not temporally disjoint."""


class ShapeError(ValueError):
    """Tensor or grid shape does not match the declared spec."""


class NormError(ValueError):
    """Embedding expected to be unit L2 norm but is not."""


class EmptyBatch(ValueError):
    """A loss was asked to reduce over zero elements."""


class ZeroSalt(ValueError):
    """Salt fraction rounds down to zero pixels for this grid size."""


class ConfigError(ValueError):
    """Configuration value outside its legal range."""


class UndefinedMetric(ValueError):
    """Metric is undefined for this label composition (e.g. one class absent)."""


class NumericalError(ArithmeticError):
    """Non-finite values encountered where finite math was required."""


class AbortNaN(RuntimeError):
    """Training hit a NaN loss; the last good checkpoint was kept."""
