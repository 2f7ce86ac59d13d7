"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CzekError(Exception):
    """Base class for every error this package raises deliberately."""


class DataError(CzekError):
    """Invalid input data: files, schemas, or value-level problems."""


class TableParseError(DataError):
    """CSV table problem, carrying 1-based row/column coordinates when known."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = ""
        if row is not None and column is not None:
            where = f" (row {row}, column {column})"
        elif row is not None:
            where = f" (row {row})"
        super().__init__(message + where)


class MetadataError(DataError):
    """Sidecar metadata file problem."""


class GridConfigError(DataError):
    """Experiment grid configuration problem."""


class DisjointSupportError(DataError):
    """A pair of observations shares no commonly observed variable."""


class SolverError(CzekError):
    """Seriation solver misuse or failure."""
