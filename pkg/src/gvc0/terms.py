"""Sorted first-order terms and snapshot trees used by the symbolic engine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .errors import InternalError

INT, BOOL, REF, SNAP = "Int", "Bool", "Ref", "Snap"


@dataclass(frozen=True)
class Term:
    sort: str


@dataclass(frozen=True)
class Lit(Term):
    value: Union[int, bool]


@dataclass(frozen=True)
class Sym(Term):
    name: str


@dataclass(frozen=True)
class App(Term):
    """Interpreted operator or Snap constructor/selector application."""
    op: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class FApp(Term):
    """Application of a pure function symbol; args[0] is the snapshot."""
    name: str
    args: tuple[Term, ...]
    limited: bool = False

    @property
    def symbol(self) -> str:
        return f"{self.name}%limited" if self.limited else self.name


TRUE = Lit(BOOL, True)
FALSE = Lit(BOOL, False)
NULL = Sym(REF, "null")
UNIT = App(SNAP, "unit", ())


def lit(v: Union[int, bool]) -> Lit:
    return Lit(BOOL, v) if isinstance(v, bool) else Lit(INT, v)


# ---------------------------------------------------------------------------
# Smart constructors

def mk_not(t: Term) -> Term:
    if isinstance(t, Lit):
        return lit(not t.value)
    if isinstance(t, App) and t.op == "not":
        return t.args[0]
    return App(BOOL, "not", (t,))


def _flatten(op: str, ts: Iterable[Term]) -> Iterator[Term]:
    for t in ts:
        if isinstance(t, App) and t.op == op:
            yield from t.args
        else:
            yield t


def mk_and(*ts: Term) -> Term:
    out: list[Term] = []
    for t in _flatten("and", ts):
        if t == TRUE or t in out:
            continue
        if t == FALSE:
            return FALSE
        out.append(t)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else App(BOOL, "and", tuple(out))


def mk_or(*ts: Term) -> Term:
    out: list[Term] = []
    for t in _flatten("or", ts):
        if t == FALSE or t in out:
            continue
        if t == TRUE:
            return TRUE
        out.append(t)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else App(BOOL, "or", tuple(out))


def mk_implies(a: Term, b: Term) -> Term:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    return App(BOOL, "=>", (a, b))


def mk_eq(a: Term, b: Term) -> Term:
    if a == b:
        return TRUE
    if isinstance(a, Lit) and isinstance(b, Lit):
        return lit(a.value == b.value)
    return App(BOOL, "=", (a, b))


def mk_ite(c: Term, a: Term, b: Term) -> Term:
    if c == TRUE or a == b:
        return a
    if c == FALSE:
        return b
    return App(a.sort, "ite", (c, a, b))


_ARITH = {"+": lambda x, y: x + y, "-": lambda x, y: x - y, "*": lambda x, y: x * y}
_CMP = {"<": lambda x, y: x < y, "<=": lambda x, y: x <= y,
        ">": lambda x, y: x > y, ">=": lambda x, y: x >= y}


def mk_arith(op: str, a: Term, b: Term) -> Term:
    if isinstance(a, Lit) and isinstance(b, Lit) and op in _ARITH:
        return lit(_ARITH[op](a.value, b.value))
    return App(INT, op, (a, b))


def mk_cmp(op: str, a: Term, b: Term) -> Term:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return lit(_CMP[op](a.value, b.value))
    return App(BOOL, op, (a, b))


def mk_neg(a: Term) -> Term:
    if isinstance(a, Lit):
        return lit(-a.value)
    return App(INT, "-", (a,))


def mk_div(a: Term, b: Term) -> Term:
    """C0 division truncates toward zero; SMT `div` is Euclidean."""
    if isinstance(a, Lit) and isinstance(b, Lit) and b.value != 0:
        q = abs(a.value) // abs(b.value)
        return lit(q if (a.value >= 0) == (b.value >= 0) else -q)
    pos = App(INT, "div", (a, b))
    neg = mk_neg(App(INT, "div", (mk_neg(a), b)))
    return mk_ite(mk_cmp(">=", a, lit(0)), pos, neg)


def mk_mod(a: Term, b: Term) -> Term:
    return mk_arith("-", a, mk_arith("*", b, mk_div(a, b)))


# -- snapshots --------------------------------------------------------------

_WRAP = {INT: "snapInt", BOOL: "snapBool", REF: "snapRef"}
_UNWRAP = {INT: "getInt", BOOL: "getBool", REF: "getRef"}


def combine(a: Term, b: Term) -> Term:
    return App(SNAP, "combine", (a, b))


def first(t: Term) -> Term:
    if isinstance(t, App) and t.op == "combine":
        return t.args[0]
    return App(SNAP, "first", (t,))


def second(t: Term) -> Term:
    if isinstance(t, App) and t.op == "combine":
        return t.args[1]
    return App(SNAP, "second", (t,))


def wrap(v: Term) -> Term:
    """Embed a value term into the Snap sort."""
    if v.sort == SNAP:
        return v
    if isinstance(v, App) and v.op == _UNWRAP[v.sort]:
        return v.args[0]
    return App(SNAP, _WRAP[v.sort], (v,))


def unwrap(s: Term, sort: str) -> Term:
    """Read a value of the given sort out of a Snap term."""
    if sort == SNAP or s.sort == sort:
        return s
    if isinstance(s, App) and s.op == _WRAP[sort]:
        return s.args[0]
    return App(sort, _UNWRAP[sort], (s,))


@dataclass(frozen=True)
class Snapshot:
    pass


@dataclass(frozen=True)
class Unit(Snapshot):
    pass


@dataclass(frozen=True)
class Leaf(Snapshot):
    term: Term


@dataclass(frozen=True)
class Pair(Snapshot):
    left: Snapshot
    right: Snapshot


def snap_term(s: Snapshot) -> Term:
    match s:
        case Unit():
            return UNIT
        case Leaf(term=t):
            return wrap(t)
        case Pair(left=l, right=r):
            return combine(snap_term(l), snap_term(r))
    raise InternalError(f"not a snapshot: {s!r}")


def split(s: Snapshot) -> tuple[Snapshot, Snapshot]:
    """Children of a snapshot standing for a conjunction."""
    match s:
        case Pair(left=l, right=r):
            return l, r
        case Leaf(term=t) if t.sort == SNAP:
            return Leaf(first(t)), Leaf(second(t))
    raise InternalError(f"snapshot {s!r} does not match a conjunction")


def snapshot_project(s: Snapshot, path: list[str]) -> Union[Term, Snapshot]:
    """Follow a left/right path through a snapshot; leaves yield their term."""
    for step in path:
        if step not in ("left", "right"):
            raise InternalError(f"invalid snapshot path step {step!r}")
        match s:
            case Pair(left=l, right=r):
                s = l if step == "left" else r
            case Leaf(term=t) if t.sort == SNAP:
                s = Leaf(first(t) if step == "left" else second(t))
            case _:
                raise InternalError(f"snapshot path {path} is invalid in {s!r}")
    if isinstance(s, Leaf):
        return s.term
    return s


def shape(s: Snapshot):
    match s:
        case Unit():
            return "unit"
        case Leaf():
            return "leaf"
        case Pair(left=l, right=r):
            return (shape(l), shape(r))


# ---------------------------------------------------------------------------
# Traversals

def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, (App, FApp)):
        for a in t.args:
            yield from subterms(a)


def symbols(t: Term) -> set[Sym]:
    return {s for s in subterms(t) if isinstance(s, Sym) and s != NULL}


def substitute(t: Term, mapping: dict[Term, Term]) -> Term:
    if t in mapping:
        return mapping[t]
    if isinstance(t, App):
        args = tuple(substitute(a, mapping) for a in t.args)
        return t if args == t.args else _rebuild(t, args)
    if isinstance(t, FApp):
        args = tuple(substitute(a, mapping) for a in t.args)
        return FApp(t.sort, t.name, args, t.limited)
    return t


def _rebuild(t: App, args: tuple[Term, ...]) -> Term:
    match t.op:
        case "and":
            return mk_and(*args)
        case "or":
            return mk_or(*args)
        case "not":
            return mk_not(args[0])
        case "=":
            return mk_eq(*args)
        case "ite":
            return mk_ite(*args)
        case "first":
            return first(args[0])
        case "second":
            return second(args[0])
        case "getInt" | "getBool" | "getRef":
            return unwrap(args[0], t.sort)
        case "+" | "*" if len(args) == 2:
            return mk_arith(t.op, *args)
        case "-" if len(args) == 2:
            return mk_arith("-", *args)
    return App(t.sort, t.op, args)


class FreshSymbols:
    """Per-run counter for globally unique symbol names."""

    def __init__(self):
        self.counter = 0

    def __call__(self, sort: str, hint: str) -> Sym:
        hint = "".join(c for c in hint if c.isalnum() or c == "_") or "t"
        s = Sym(sort, f"{hint}@{self.counter}")
        self.counter += 1
        return s


def term_str(t: Term) -> str:
    match t:
        case Lit(value=v):
            return str(v).lower() if isinstance(v, bool) else str(v)
        case Sym(name=n):
            return n
        case App(op=op, args=()):
            return op
        case App(op=op, args=args) | FApp(name=op, args=args):
            if isinstance(t, FApp):
                op = t.symbol
            return f"({op} {' '.join(term_str(a) for a in args)})"
    return repr(t)
