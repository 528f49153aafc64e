"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent or unsupported model configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""
