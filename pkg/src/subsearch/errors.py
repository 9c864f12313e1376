"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or out of range."""


class EvaluationError(RuntimeError):
    """A fitness evaluation failed or returned a non-finite value."""


class ProtocolError(RuntimeError):
    """The external-objective child process violated the wire protocol."""
