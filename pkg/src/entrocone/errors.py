"""Exception types shared across the package."""


class EntroconeError(Exception):
    """Base class for package-specific errors."""


class ResourceLimitError(EntroconeError):
    """A configured size or work cap was exceeded."""


class InfeasibleSystemError(EntroconeError):
    """A constraint system turned out to have an empty feasible set."""


class SchemaError(ValueError):
    """An input file does not match its documented schema."""
