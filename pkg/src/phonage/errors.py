"""Exception types shared across the package."""


class PhonageError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PhonageError):
    """An input file (CTM, manifest, label, spec) could not be parsed."""


class DataError(PhonageError):
    """Inputs parse but violate a data contract (joins, layouts, units)."""


class ConfigError(PhonageError):
    """Invalid configuration or parameter combination."""


class UnsupportedModelError(PhonageError):
    """Operation not defined for this model class."""
