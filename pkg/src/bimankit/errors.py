"""Exception types shared across the toolkit.

The CLI maps ValidationError (and plain ValueError) to exit code 1 and
OSError to exit code 2; everything else is a bug.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ConfigurationError(ValidationError):
    """Inconsistent configuration (camera sets, grid specs, topologies)."""


class FormatError(ValidationError):
    """On-disk artifact is malformed or has an unsupported version."""


class EncodeError(ValidationError):
    """Continuous action cannot be discretized (e.g. out-of-workspace arm)."""
