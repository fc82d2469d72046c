"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes (config=2, data=3, numeric=4).
"""


class ZgeError(Exception):
    """Base class for package errors."""


class ConfigError(ZgeError):
    """Invalid configuration file, flag value, or parameter combination."""


class DataError(ZgeError):
    """Malformed or inconsistent input data (files, caches, label sets)."""


class NumericError(ZgeError):
    """Non-finite values or numerically invalid state encountered."""
