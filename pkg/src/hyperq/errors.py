"""Shared exception types."""


class HyperqError(Exception):
    """Base class for all package errors."""


class ValidationError(HyperqError):
    """A model or property violates a structural requirement."""


class ResourceGuardError(HyperqError):
    """A configurable resource ceiling was hit before an exact answer."""
