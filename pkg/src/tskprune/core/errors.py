"""Exception hierarchy for tskprune."""

from typing import Optional


class TskError(Exception):
    """Base class for every error raised by tskprune."""


class ParameterDomainError(TskError, ValueError):
    """A membership function or hyperparameter lies outside its domain."""


class InputShapeError(TskError, ValueError):
    """Input arrays have the wrong dimensions or are empty."""


class InsufficientDataError(TskError, ValueError):
    """Not enough samples for the requested operation (e.g. N < R)."""


class PreprocessingError(TskError, ValueError):
    """Normalization statistics cannot be computed (zero-variance feature)."""


class ModelFileError(TskError, ValueError):
    """A serialized model cannot be read or does not match the data."""


class DatasetLoadError(TskError, ValueError):
    """A CSV dataset could not be parsed.

    ``row`` is the 1-based line number in the file and ``column`` the 1-based
    column number, when the failure can be pinned to a cell.
    """

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[int] = None
    ) -> None:
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column
