"""Exception types shared across the trace analysis toolkit."""


class TracelensError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecord(TracelensError):
    """A trace line is not syntactically parseable."""


class SchemaViolation(TracelensError):
    """A trace record is parseable but structurally invalid."""


class EmptyTrace(TracelensError):
    """A document has no decoding steps."""


class InvalidConfig(TracelensError):
    """A configuration value is out of range or inconsistent."""


class InsufficientMass(TracelensError):
    """A stored distribution holds less probability mass than the requested nucleus."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class NotNormalized(TracelensError):
    """A probability vector does not sum to one."""


class UnbalancedBrackets(TracelensError):
    """A bracketed tree string has mismatched parentheses."""


class EmptyTree(TracelensError):
    """A bracketed tree string contains no content."""


class AlignmentFailure(TracelensError):
    """Parse-tree leaves cannot be matched to the sentence's words."""


class ZeroRow(TracelensError):
    """An attention row sums to zero and cannot be normalized."""

    def __init__(self, message: str, row_index: int | None = None):
        super().__init__(message)
        self.row_index = row_index


class AllBlockedMass(TracelensError):
    """Blocking removed essentially all attention mass from a row."""

    def __init__(self, message: str, row_index: int | None = None):
        super().__init__(message)
        self.row_index = row_index


class MissingInput(TracelensError):
    """An input path does not exist."""


class FormatVersionMismatch(TracelensError):
    """A trace file header declares an unsupported format version."""


class ConfigMismatch(TracelensError):
    """Report bundles produced under different configurations cannot be merged."""
