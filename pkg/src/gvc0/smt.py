"""SMT-LIB 2 solver sessions over a subprocess, term encoding and axioms."""

from __future__ import annotations

import enum
import logging
import os
import selectors
import shlex
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import InternalError, SolverError
from .terms import App, FApp, Lit, Sym, Term, symbols, subterms

log = logging.getLogger(__name__)

PREAMBLE = """(set-logic ALL)
(declare-sort Ref 0)
(declare-const null Ref)
(declare-datatypes ((Snap 0)) (((unit) (combine (first Snap) (second Snap)) (snapInt (getInt Int)) (snapBool (getBool Bool)) (snapRef (getRef Ref)))))"""

DEFAULT_COMMAND = "z3 -in"
_SENTINEL = "gvc0-done"

_RESERVED = {
    "abs", "div", "mod", "ite", "and", "or", "not", "xor", "distinct", "true", "false",
    "let", "forall", "exists", "first", "second", "unit", "combine", "snapInt", "snapBool",
    "snapRef", "getInt", "getBool", "getRef", "null", "to_real", "to_int", "is_int", "Int",
    "Bool", "Ref", "Snap", "select", "store",
}


class Validity(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


def function_symbol(name: str, limited: bool = False) -> str:
    base = f"{name}%fn" if name in _RESERVED else name
    return f"{base}%limited" if limited else base


def encode_term(t: Term) -> str:
    """Deterministic S-expression for a term."""
    match t:
        case Lit(value=v) if isinstance(v, bool):
            return "true" if v else "false"
        case Lit(value=v):
            return str(v) if v >= 0 else f"(- {-v})"
        case Sym(name=n):
            return n
        case App(op=op, args=()):
            return op
        case App(op=op, args=args):
            return f"({op} {' '.join(encode_term(a) for a in args)})"
        case FApp(name=n, args=args, limited=lim):
            return f"({function_symbol(n, lim)} {' '.join(encode_term(a) for a in args)})"
    raise InternalError(f"cannot encode {t!r}")


@dataclass(frozen=True)
class Axiom:
    name: str
    text: str


def resolve_command(command: Union[str, Sequence[str], None]) -> list[str]:
    """Solver argv.  Falls back to the bundled z3 REPL when the default
    `z3` executable is not installed."""
    if command is None:
        command = os.environ.get("GVC0_SOLVER") or DEFAULT_COMMAND
        argv = shlex.split(command)
        if command == DEFAULT_COMMAND and shutil.which("z3") is None:
            return [sys.executable, "-m", "gvc0.z3shim"]
        return argv
    if isinstance(command, str):
        return shlex.split(command)
    return list(command)


class SolverSession:
    """One live solver process with an incremental assertion stack."""

    def __init__(self, command: Union[str, Sequence[str], None] = None, timeout: float = 10.0):
        self.argv = resolve_command(command)
        self.timeout = timeout
        self.declared: set[str] = set()
        self.functions: dict[str, tuple[tuple[str, ...], str]] = {}
        self.depth = 0
        self.transcript: list[str] = []
        # declarations and axioms in emission order; replayed after a crash
        self.log: list[str] = []
        self.queries = 0
        self._start()

    # -- process management --------------------------------------------------

    def _start(self) -> None:
        try:
            self.proc = subprocess.Popen(
                self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT, bufsize=0)
        except OSError as exc:
            raise SolverError(f"cannot start solver '{shlex.join(self.argv)}': {exc}") from exc
        self._buf = b""
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)
        out = self._run(PREAMBLE + f"\n(set-option :timeout {int(self.timeout * 1000)})"
                        + "\n(set-option :smt.mbqi false)")
        if out:
            raise SolverError(f"solver rejected preamble: {' '.join(out)}")
        for cmd in self.log:
            self._run(cmd)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write(b"(exit)\n")
                self.proc.stdin.flush()
                self.proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
        self._sel.close()

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _readline(self, deadline: float) -> str:
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.proc.kill()
                raise SolverError("solver did not answer in time")
            if not self._sel.select(remaining):
                continue
            chunk = os.read(self.proc.stdout.fileno(), 65536)
            if not chunk:
                raise SolverError("solver process exited:\n" + "\n".join(self.transcript[-5:]))
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode().strip()

    def _run(self, text: str) -> list[str]:
        """Send commands and collect response lines up to a sentinel echo."""
        self.transcript.append(text)
        try:
            self.proc.stdin.write((text + f'\n(echo "{_SENTINEL}")\n').encode())
            self.proc.stdin.flush()
        except OSError as exc:
            raise SolverError(f"solver pipe closed: {exc}") from exc
        deadline = time.monotonic() + self.timeout + 5.0
        lines = []
        while True:
            line = self._readline(deadline)
            if line == _SENTINEL:
                return lines
            if line.startswith("(error"):
                raise SolverError(f"solver error: {line}\nwhile processing:\n{text}")
            if line:
                lines.append(line)

    # -- declarations --------------------------------------------------------

    def _emit(self, text: str) -> None:
        self._run(text)
        self.log.append(text)

    def declare_symbols(self, terms: Iterable[Term]) -> None:
        new = []
        for t in terms:
            for s in sorted(symbols(t), key=lambda s: s.name):
                if s.name not in self.declared:
                    self.declared.add(s.name)
                    new.append(f"(declare-const {s.name} {s.sort})")
            for sub in subterms(t):
                if isinstance(sub, FApp) and sub.name not in self.functions:
                    raise InternalError(f"function {sub.name} used before declaration")
        if new:
            if self.depth:
                raise InternalError("declarations must happen at assertion depth 0")
            self._emit("\n".join(new))

    def declare_function(self, name: str, param_sorts: Sequence[str], ret: str) -> None:
        if name in self.functions:
            raise InternalError(f"function {name} declared twice")
        self.functions[name] = (tuple(param_sorts), ret)
        sig = " ".join(("Snap",) + tuple(param_sorts))
        self._emit(f"(declare-fun {function_symbol(name)} ({sig}) {ret})\n"
                   f"(declare-fun {function_symbol(name, True)} ({sig}) {ret})")

    def assert_axiom(self, axiom: Axiom) -> None:
        self._emit(f"; {axiom.name}\n(assert {axiom.text})")

    def assert_term(self, t: Term) -> None:
        self.declare_symbols([t])
        self._emit(f"(assert {encode_term(t)})")

    # -- queries -------------------------------------------------------------

    def check_sat(self, assumptions: Sequence[Term]) -> str:
        self.declare_symbols(assumptions)
        lines = ["(push 1)"] + [f"(assert {encode_term(a)})" for a in assumptions]
        lines += ["(check-sat)", "(pop 1)"]
        depth = self.depth
        self.queries += 1
        try:
            out = self._run("\n".join(lines))
        except SolverError as exc:
            log.warning("solver failure, restarting: %s", exc)
            self._restart()
            return "unknown"
        assert self.depth == depth
        return out[0] if out else "unknown"

    def check_valid(self, pc: Sequence[Term], phi: Term) -> Validity:
        """Is `phi` entailed by the path condition?"""
        from .terms import mk_not
        res = self.check_sat(list(pc) + [mk_not(phi)])
        if res == "unsat":
            return Validity.VALID
        if res == "sat":
            return Validity.INVALID
        return Validity.UNKNOWN

    def fork(self) -> "SolverSession":
        """A fresh process holding the same declarations and axioms."""
        other = SolverSession(self.argv, self.timeout)
        for cmd in self.log:
            other._emit(cmd)
        other.declared = set(self.declared)
        other.functions = dict(self.functions)
        return other

    def _restart(self) -> None:
        try:
            self.proc.kill()
        except OSError:
            pass
        self._sel.close()
        self._start()


def start_session(command: Union[str, Sequence[str], None] = None,
                  timeout: float = 10.0) -> SolverSession:
    return SolverSession(command, timeout)


def quantified(name: str, bound: Sequence[Sym], trigger: Term, body: Term) -> Axiom:
    decls = " ".join(f"({b.name} {b.sort})" for b in bound)
    text = (f"(forall ({decls}) (! {encode_term(body)} "
            f":pattern ({encode_term(trigger)}) :qid {name}))")
    return Axiom(name, text)


def preamble_text() -> str:
    return PREAMBLE
