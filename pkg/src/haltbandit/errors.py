"""Exception types shared across the package.

The command-line layer maps these onto its exit codes: document/format
problems exit 2, resource-cap refusals exit 3, precondition violations
exit 4.
"""

from __future__ import annotations


class HaltBanditError(Exception):
    """Base class for every error raised by this package."""


class ModelFormatError(HaltBanditError):
    """A model document could not be parsed or violates the file schema."""


class ResourceCapError(HaltBanditError):
    """An enumeration or search would exceed its configured cap."""


class PreconditionError(HaltBanditError):
    """An operation was invoked outside its stated preconditions."""


class InvalidRuleError(PreconditionError):
    """A stopping rule is malformed for its anchor."""


class SolverError(HaltBanditError):
    """An iterative solver failed to converge within its iteration cap."""
