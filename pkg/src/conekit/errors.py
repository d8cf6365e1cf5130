"""Exception hierarchy shared by all conekit modules.

The CLI maps these onto process exit codes: configuration problems exit
with 1, numerical failures with 2, and explicitly unsupported regimes
with 3.
"""


class ConekitError(Exception):
    """Base class for all conekit errors."""


class ConfigError(ConekitError):
    """Invalid configuration: bad schema, unknown keys, bad parameter values."""


class NumericsError(ConekitError):
    """A numerical routine could not meet its accuracy or budget contract."""


class ConvergenceError(NumericsError):
    """A series or iteration failed to converge within its term budget."""


class UnsupportedRegimeError(ConekitError):
    """The requested computation is outside the supported regime."""
