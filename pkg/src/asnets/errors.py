"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ASNetError(Exception):
    """Base class for all errors raised by this package."""


class PPDDLError(ASNetError):
    """Parse-time error carrying an optional source position."""

    def __init__(self, message: str, line: int | None = None,
                 col: int | None = None, filename: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(self.format())

    def format(self) -> str:
        if self.line is None:
            loc = self.filename or "<input>"
            return f"{loc}: {self.message}"
        return f"{self.filename or '<input>'}:{self.line}:{self.col}: {self.message}"


class PPDDLSyntaxError(PPDDLError):
    pass


class UnsupportedFeature(PPDDLError):
    pass


class SemanticsError(PPDDLError):
    pass


class CapacityError(ASNetError):
    pass


class NotApplicable(ASNetError):
    pass


class PolicyError(ASNetError):
    pass


class NoEnabledAction(ASNetError):
    pass


class FormatError(ASNetError):
    pass


class DomainMismatch(ASNetError):
    pass


class TeacherBudgetExhausted(ASNetError):
    pass


class EmptyMemory(ASNetError):
    pass
