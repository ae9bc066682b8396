"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericalError -> 3. Anything else is a bug.
"""


class HtrError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HtrError):
    """Bad usage, bad configuration, or a violated call contract."""


class DataError(HtrError):
    """Malformed or unusable input data."""


class InfeasibleAlignmentError(DataError):
    """Label sequence cannot be aligned to the given number of frames."""


class NumericalError(HtrError):
    """Numerical failure: NaN/Inf parameters, diverged training, etc."""
