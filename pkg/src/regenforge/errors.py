"""Shared exception types."""


class RegenforgeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RegenforgeError):
    """A config file is missing, malformed, or violates the schema."""


class ContractError(RegenforgeError):
    """An operation was called with inputs that violate its contract."""
