"""Gradual symbolic state: heaps, store, path condition and residual checks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .errors import InternalError
from .printer import expr_str, formula_str
from .smt import SolverSession, Validity
from .syntax import Expr, Formula, Loc, negate
from .terms import NULL, Snapshot, Term, mk_and, mk_eq, mk_not, FreshSymbols

# (node id, phase).  Phases: "" for the node itself, "entry"/"exit" for
# callable boundaries, "body"/"iter"/"exit" for loops, "post" after a call,
# "branch" for code-level branch decisions.
Anchor = tuple[int, str]


@dataclass(frozen=True)
class FieldChunk:
    receiver: Term
    field: str
    value: Term


@dataclass(frozen=True)
class PredicateChunk:
    name: str
    args: tuple[Term, ...]
    snapshot: Snapshot


Chunk = Union[FieldChunk, PredicateChunk]


@dataclass(frozen=True)
class Guard:
    """A branch decision, in source terms.

    Code-level guards are anchored at the branching node with phase "branch";
    specification-level guards at the program point where the formula holding
    the conditional was produced or consumed.
    """
    anchor: Anchor
    expr: Expr = field(compare=False)
    positive: bool
    term: Term = field(compare=False)
    cond_text: str = ""

    @property
    def text(self) -> str:
        return expr_str(self.expr) if self.positive else expr_str(negate(self.expr))


def make_guard(anchor: Anchor, expr: Expr, positive: bool, term: Term) -> Guard:
    return Guard(anchor, expr, positive, term, expr_str(expr))


@dataclass(frozen=True)
class CheckOrigin:
    callee: str
    call_site: Loc
    bindings: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class RuntimeCheck:
    kind: str
    condition: Formula = field(compare=False)
    loc: Loc
    anchor: Anchor
    guards: tuple[Guard, ...]
    origin: Optional[CheckOrigin]
    text: str = ""

    @property
    def guard_texts(self) -> list[str]:
        return [g.text for g in self.guards]


def make_check(kind: str, condition: Formula, loc: Loc, anchor: Anchor,
               guards: tuple[Guard, ...] = (), origin: Optional[CheckOrigin] = None) -> RuntimeCheck:
    return RuntimeCheck(kind, condition, loc, anchor, guards, origin, formula_str(condition))


@dataclass(frozen=True)
class SymbolicState:
    imprecise: bool = False
    opt_heap: tuple[Chunk, ...] = ()
    heap: tuple[Chunk, ...] = ()
    store: dict[str, Term] = field(default_factory=dict, compare=False)
    pc: tuple[Term, ...] = ()
    branches: tuple[Guard, ...] = ()
    checks: tuple[RuntimeCheck, ...] = ()
    origin: Optional[CheckOrigin] = None
    returned: bool = False

    def bind(self, name: str, t: Term) -> "SymbolicState":
        return replace(self, store={**self.store, name: t})

    def assume(self, *facts: Term) -> "SymbolicState":
        pc = list(self.pc)
        for f in facts:
            if f not in pc and f != mk_and():
                pc.append(f)
        return replace(self, pc=tuple(pc))

    def with_heaps(self, heap, opt_heap) -> "SymbolicState":
        return replace(self, heap=tuple(heap), opt_heap=tuple(opt_heap))


# ---------------------------------------------------------------------------

def _provably_equal(session: SolverSession, pc, a: Term, b: Term) -> bool:
    if a == b:
        return True
    # unknown degrades to "not equal"
    return session.check_valid(pc, mk_eq(a, b)) is Validity.VALID


def heap_lookup(session: SolverSession, st: SymbolicState, receiver: Term,
                fname: str) -> Optional[tuple[str, FieldChunk]]:
    """Find the chunk for receiver.fname in h, then h?.  Returns the heap it
    came from ("h" or "h?") and the chunk."""
    for which, heap in (("h", st.heap), ("h?", st.opt_heap)):
        for c in heap:
            if isinstance(c, FieldChunk) and c.field == fname and c.receiver == receiver:
                return which, c
    for which, heap in (("h", st.heap), ("h?", st.opt_heap)):
        for c in heap:
            if isinstance(c, FieldChunk) and c.field == fname and \
                    _provably_equal(session, st.pc, c.receiver, receiver):
                return which, c
    return None


def predicate_lookup(session: SolverSession, st: SymbolicState, name: str,
                     args: tuple[Term, ...]) -> Optional[tuple[str, PredicateChunk]]:
    for which, heap in (("h", st.heap), ("h?", st.opt_heap)):
        for c in heap:
            if isinstance(c, PredicateChunk) and c.name == name and c.args == args:
                return which, c
    for which, heap in (("h", st.heap), ("h?", st.opt_heap)):
        for c in heap:
            if isinstance(c, PredicateChunk) and c.name == name and len(c.args) == len(args):
                eq = mk_and(*(mk_eq(a, b) for a, b in zip(c.args, args)))
                if session.check_valid(st.pc, eq) is Validity.VALID:
                    return which, c
    return None


def remove_chunk(st: SymbolicState, which: str, chunk: Chunk) -> SymbolicState:
    heap = st.heap if which == "h" else st.opt_heap
    idx = heap.index(chunk)
    rest = heap[:idx] + heap[idx + 1:]
    return replace(st, heap=rest) if which == "h" else replace(st, opt_heap=rest)


def add_optimistic_chunk(session: SolverSession, fresh: FreshSymbols, st: SymbolicState,
                         receiver: Term, fname: str, sort: str) -> tuple[SymbolicState, Term]:
    """Assume a chunk for receiver.fname in h? with a fresh value."""
    if not st.imprecise:
        raise InternalError("optimistic chunk requested in a precise state")
    found = heap_lookup(session, st, receiver, fname)
    if found is not None:
        return st, found[1].value
    v = fresh(sort, fname)
    st = replace(st, opt_heap=st.opt_heap + (FieldChunk(receiver, fname, v),))
    return st.assume(mk_not(mk_eq(receiver, NULL))), v


def record_check(st: SymbolicState, check: RuntimeCheck) -> SymbolicState:
    """Append a check guarded by the current branch stack."""
    guards: list[Guard] = []
    for g in st.branches + check.guards:
        if g not in guards:
            guards.append(g)
    check = replace(check, guards=tuple(guards), origin=check.origin or st.origin)
    return replace(st, checks=st.checks + (check,))
