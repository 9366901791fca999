"""Exception types raised across the package."""

from __future__ import annotations


class RelevanceError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(RelevanceError, ValueError):
    """Directional quantity requested for a (near) zero-length vector."""


class InvalidParams(RelevanceError, ValueError):
    pass


class NotApplicable(RelevanceError):
    """A scenario hypothesis does not apply to the given pair."""


class InvalidProfile(RelevanceError, ValueError):
    pass


class EmptySample(RelevanceError, ValueError):
    pass


class InvalidSpec(RelevanceError, ValueError):
    pass


class DataError(RelevanceError):
    """Problem with input data; carries an optional line number."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")
        self.message = message


class FormatError(DataError):
    pass


class DuplicateId(DataError):
    pass


class UnknownEgoId(DataError):
    pass
