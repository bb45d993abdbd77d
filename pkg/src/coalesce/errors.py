"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """A linear-algebra or floating-point operation left the valid domain."""


class InvalidStateError(RuntimeError):
    """An object reached a state that the surrounding algorithm cannot use."""


class ConfigError(ValueError):
    """A configuration value is malformed or out of range."""
