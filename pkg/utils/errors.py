"""
WIRES - Error Types
Exceptions raised by configuration, λ search and dispatch.
"""


class WiresError(Exception):
    """Base class for every error WIRES raises on purpose."""


class ConfigError(WiresError):
    """Invalid configuration value, reported with its dotted field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class BracketError(ConfigError):
    """No sign change of J(λ) could be bracketed."""
