"""Shared exception types."""


class VsdkitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(VsdkitError):
    """A structured text input (CSV log, config, metadata table) is malformed."""


class FormatError(VsdkitError):
    """A binary or serialized artifact violates its format contract."""


class LayoutError(FormatError):
    """Feature matrix dimensions disagree with the declared layout."""


class SolverError(VsdkitError):
    """An optimizer received bad inputs or failed to reach its tolerance."""


class ConfigError(VsdkitError):
    """Invalid parameters or preconditions for an operation."""
