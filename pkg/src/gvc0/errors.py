"""Exception hierarchy shared by the front end, engine and runtime."""

from __future__ import annotations

from typing import Optional

Loc = tuple[int, int]


class GvError(Exception):
    def __init__(self, message: str, loc: Optional[Loc] = None):
        super().__init__(message)
        self.message = message
        self.loc = loc

    def __str__(self) -> str:
        if self.loc and self.loc != (0, 0):
            return f"{self.loc[0]}:{self.loc[1]}: {self.message}"
        return self.message


class FrontendError(GvError):
    """Ill-formed input: parse, name resolution, typing or purity."""


class ParseError(FrontendError):
    pass


class TypeCheckError(FrontendError):
    pass


class PurityError(FrontendError):
    pass


class VerificationFailure(GvError):
    """A static verification failure of one declaration."""

    def __init__(self, message: str, loc: Optional[Loc] = None, unknown: bool = False):
        super().__init__(message, loc)
        self.unknown = unknown


class ExtensionFailure(VerificationFailure):
    """Snapshot extension of an imprecise function precondition failed."""


class InternalError(GvError):
    pass


class SolverError(InternalError):
    pass
