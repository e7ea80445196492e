"""Gradual verification of a C0 subset with pure functions."""

from .errors import (
    ExtensionFailure, FrontendError, GvError, InternalError, ParseError, PurityError,
    SolverError, TypeCheckError, VerificationFailure,
)
from .frontend import TypedProgram, load
from .methods import DeclReport, VerificationReport, verify_program
from .runtime import CheckFailure, ConcreteHeap, eval_pure_concrete, interpret
from .smt import SolverSession, start_session

__all__ = [
    "CheckFailure", "ConcreteHeap", "DeclReport", "ExtensionFailure", "FrontendError",
    "GvError", "InternalError", "ParseError", "PurityError", "SolverError", "SolverSession",
    "TypeCheckError", "TypedProgram", "VerificationFailure", "VerificationReport",
    "eval_pure_concrete", "interpret", "load", "start_session", "verify_program",
]
