"""Exceptions shared across the package."""


class ValidationError(ValueError):
    """Raised when an input value, configuration, or file fails validation."""


class NoOperatingPointError(RuntimeError):
    """Raised when an operation needs a channel operating point but the
    channel analysis has none (overloaded channel)."""
