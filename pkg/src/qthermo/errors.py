"""Exception types shared across the package."""


class QThermoError(Exception):
    """Base class for all package errors."""


class DomainError(QThermoError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(QThermoError, ValueError):
    """Inconsistent protocol or experiment configuration."""


class CapacityError(QThermoError, RuntimeError):
    """A request exceeds an enumeration or truncation limit."""


class DegenerateInputError(QThermoError, ArithmeticError):
    """A ratio is undefined for the supplied inputs (zero denominator)."""
