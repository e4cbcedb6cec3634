"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config -> 1, I/O and file
format -> 2, numeric/solver failures -> 3.
"""


class CtsgenError(Exception):
    """Base class for all package errors."""


class UsageError(CtsgenError):
    """Caller violated a documented precondition."""


class ConfigError(UsageError):
    """Invalid configuration value or config file entry."""


class DimensionError(CtsgenError):
    """Shapes incompatible with the requested operation."""


class NumericError(CtsgenError):
    """Division by zero, overflow, or non-finite intermediate value."""


class SchemaError(CtsgenError):
    """Input file is structurally wrong (e.g. missing CSV column)."""


class ParseError(CtsgenError):
    """Input file contains an unparseable cell or expression."""


class ConstraintError(CtsgenError):
    """Constraint refers to indices outside the sample grid, or is malformed."""


class CheckpointError(CtsgenError):
    """Model checkpoint is corrupt, truncated, or has a wrong version."""


class SolverError(CtsgenError):
    """Constrained solve failed in a way the caller cannot recover from."""
