"""Exception hierarchy shared across the package."""


class ActiveBasisError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ActiveBasisError):
    """Invalid parameters, configuration values, or degenerate model tables."""


class DataError(ActiveBasisError):
    """Unreadable or malformed input data."""


class SizeError(DataError):
    """Image, lattice, or template geometry that cannot fit together."""


class DegenerateImageError(ActiveBasisError):
    """Image with zero filter-response variance (e.g. a constant image)."""


class MarginError(ActiveBasisError):
    """Every pooling candidate for a pose falls outside the valid region."""
