"""Exception types shared across the package.

Each class carries a stable ``code`` used as the diagnostic prefix by the CLI.
"""


class RtsfError(Exception):
    code = "E_RTSF"


class ConfigError(RtsfError, ValueError):
    """Invalid configuration: block specs, feature ids, hyperparameters, layouts."""

    code = "E_CONFIG"


class DomainError(RtsfError, ValueError):
    """A feature was asked for on a series it is not defined for."""

    code = "E_DOMAIN"


class InputError(RtsfError, IOError):
    """Missing or malformed input files."""

    code = "E_INPUT"


class UsageError(RtsfError, RuntimeError):
    """API misuse (non-scalar loss, missing checkpoint, nondeterministic check)."""

    code = "E_USAGE"


class TrainingError(RtsfError, RuntimeError):
    code = "E_TRAIN"
