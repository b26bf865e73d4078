"""Exception types shared across sepkit modules."""


class SepkitError(Exception):
    """Base class for sepkit errors."""


class AudioFormatError(SepkitError):
    """Unreadable, truncated, or unsupported audio file."""


class ShapeMismatchError(SepkitError):
    """Signal lengths, sample rates, or source counts do not line up."""


class DegenerateInputError(SepkitError):
    """An input is degenerate for the requested operation (e.g. all-zero reference)."""


class CapacityError(SepkitError):
    """Requested enumeration exceeds the configured capacity."""


class StudyConfigError(SepkitError):
    """A listening-study configuration is invalid."""
