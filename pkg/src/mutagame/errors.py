"""Exception types shared across the package."""

from __future__ import annotations


class MutagameError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(MutagameError, ValueError):
    """An operation was called with arguments that violate its contract."""


class CapacityError(MutagameError):
    """A request exceeds a hard size limit (e.g. too many players to enumerate)."""


class ScenarioValidationError(MutagameError):
    """A scenario document failed validation; carries every violation found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))
