"""Shared exception types."""


class GexnetError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GexnetError, ValueError):
    """A mathematical operation was evaluated outside its domain."""


class SmilesParseError(GexnetError, ValueError):
    """Invalid SMILES input; carries the byte offset of the offending character."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class TableFormatError(GexnetError, ValueError):
    """Malformed descriptor or parameter table; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class DataValidationError(GexnetError, ValueError):
    """Dataset rows or query inputs violating an invariant."""


class DegenerateEmbeddingError(GexnetError, ValueError):
    """A component embedding has zero norm; cosine distance is undefined."""


class CheckpointError(GexnetError, ValueError):
    """A model checkpoint file is missing fields, malformed, or non-finite."""


class UnitMismatchError(GexnetError, ValueError):
    """Two quantities with different declared units were combined."""


class TrainingDivergedError(GexnetError, RuntimeError):
    """Training produced non-finite losses or gradients."""
