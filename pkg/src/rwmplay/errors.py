"""Exception types shared across the package."""


class RwmError(Exception):
    """Base class for all package errors."""


class DomainError(RwmError, ValueError):
    """A point or function lies outside the domain an operation requires."""


class MonotonicityError(RwmError, ValueError):
    """A query that must be non-decreasing was observed to decrease."""


class UsageError(RwmError, TypeError):
    """An API was called with an object in the wrong state (e.g. not preprocessed)."""


class ValidationError(RwmError, ValueError):
    """An action, allocation or specification violates its stated constraints."""


class InvariantError(RwmError, RuntimeError):
    """An internal invariant failed; indicates corrupted state rather than bad input."""


class ResourceGuardError(RwmError, MemoryError):
    """A hard size limit for dense or enumerative computation was exceeded."""


class ConfigError(RwmError, ValueError):
    """A CLI configuration file failed schema or semantic validation."""
