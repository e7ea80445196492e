"""AST for the C0 subset accepted by the verifier.

Every node carries a source location and a per-parse node id.  Both are
excluded from equality so that structurally identical trees compare equal
regardless of where they came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

Loc = tuple[int, int]
NOLOC: Loc = (0, 0)


@dataclass
class Node:
    loc: Loc = field(default=NOLOC, kw_only=True, compare=False, repr=False)
    nid: int = field(default=-1, kw_only=True, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class PrimType:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class RefType:
    struct: str

    def __str__(self) -> str:
        return f"struct {self.struct}*"


INT = PrimType("int")
BOOL = PrimType("bool")
VOID = PrimType("void")
# type of the NULL literal; compatible with every reference type
NULLT = PrimType("null")

Type = Union[PrimType, RefType]


# ---------------------------------------------------------------------------
# Expressions

@dataclass
class Expr(Node):
    ty: Optional[Type] = field(default=None, kw_only=True, compare=False, repr=False)


@dataclass
class IntLit(Expr):
    value: int


@dataclass
class BoolLit(Expr):
    value: bool


@dataclass
class NullLit(Expr):
    pass


@dataclass
class VarRef(Expr):
    name: str


@dataclass
class ResultRef(Expr):
    pass


@dataclass
class FieldAccess(Expr):
    obj: Expr
    field: str


@dataclass
class Unary(Expr):
    op: str
    arg: Expr


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass
class Ternary(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass
class Call(Expr):
    """Application of a pure function, or of a method at statement level."""
    name: str
    args: list[Expr]


@dataclass
class Unfolding(Expr):
    pred: str
    args: list[Expr]
    body: Expr


@dataclass
class Alloc(Expr):
    struct: str


# ---------------------------------------------------------------------------
# Specification formulas

@dataclass
class Formula(Node):
    pass


@dataclass
class Pure(Formula):
    expr: Expr


@dataclass
class Acc(Formula):
    target: FieldAccess


@dataclass
class PredInst(Formula):
    name: str
    args: list[Expr]


@dataclass
class Conj(Formula):
    left: Formula
    right: Formula


@dataclass
class CondF(Formula):
    cond: Expr
    then: Formula
    other: Formula


@dataclass
class GradualFormula(Node):
    imprecise: bool
    body: Formula


def true_formula() -> GradualFormula:
    return GradualFormula(False, Pure(BoolLit(True)))


def is_true(f: Formula) -> bool:
    return isinstance(f, Pure) and isinstance(f.expr, BoolLit) and f.expr.value


def merge_clauses(clauses: list[GradualFormula]) -> GradualFormula:
    """Conjoin clauses left to right; any `?` makes the whole result imprecise."""
    imprecise = any(c.imprecise for c in clauses)
    parts = [c.body for c in clauses if not (c.imprecise and is_true(c.body))]
    if not parts:
        return GradualFormula(imprecise, Pure(BoolLit(True)))
    body = parts[0]
    for p in parts[1:]:
        body = Conj(body, p, loc=body.loc)
    loc = clauses[0].loc if clauses else NOLOC
    return GradualFormula(imprecise, body, loc=loc)


# ---------------------------------------------------------------------------
# Statements

@dataclass
class Stmt(Node):
    pass


@dataclass
class Block(Stmt):
    stmts: list[Stmt]


@dataclass
class VarDecl(Stmt):
    type: Type
    name: str
    init: Optional[Expr]


@dataclass
class Assign(Stmt):
    target: str
    value: Expr


@dataclass
class FieldWrite(Stmt):
    target: FieldAccess
    value: Expr


@dataclass
class CallStmt(Stmt):
    """Method call, optionally assigning the result to a local."""
    target: Optional[str]
    name: str
    args: list[Expr]


@dataclass
class If(Stmt):
    cond: Expr
    then: Block
    other: Optional[Block]


@dataclass
class While(Stmt):
    cond: Expr
    invariants: list[GradualFormula]
    body: Block

    @property
    def invariant(self) -> GradualFormula:
        return merge_clauses(self.invariants)


@dataclass
class Assert(Stmt):
    formula: GradualFormula


@dataclass
class Fold(Stmt):
    pred: str
    args: list[Expr]


@dataclass
class Unfold(Stmt):
    pred: str
    args: list[Expr]


@dataclass
class Return(Stmt):
    value: Optional[Expr]


# ---------------------------------------------------------------------------
# Declarations

@dataclass
class Param(Node):
    type: Type
    name: str


@dataclass
class StructDecl(Node):
    name: str
    fields: list[tuple[str, Type]]

    def field_type(self, name: str) -> Optional[Type]:
        for fname, fty in self.fields:
            if fname == name:
                return fty
        return None


@dataclass
class Typedef(Node):
    struct: str
    alias: str


@dataclass
class PredicateDecl(Node):
    name: str
    params: list[Param]
    body: GradualFormula


@dataclass
class FunctionDecl(Node):
    name: str
    params: list[Param]
    ret: Type
    requires: list[GradualFormula]
    ensures: list[GradualFormula]
    block: Block
    # the returned expression when the block is a single `return e;`
    body: Optional[Expr] = None

    @property
    def pre(self) -> GradualFormula:
        return merge_clauses(self.requires)

    @property
    def post(self) -> GradualFormula:
        return merge_clauses(self.ensures)


@dataclass
class MethodDecl(Node):
    name: str
    params: list[Param]
    ret: Type
    requires: list[GradualFormula]
    ensures: list[GradualFormula]
    body: Block

    @property
    def pre(self) -> GradualFormula:
        return merge_clauses(self.requires)

    @property
    def post(self) -> GradualFormula:
        return merge_clauses(self.ensures)


Decl = Union[StructDecl, Typedef, PredicateDecl, FunctionDecl, MethodDecl]


@dataclass
class Program(Node):
    decls: list[Decl]

    @property
    def structs(self) -> list[StructDecl]:
        return [d for d in self.decls if isinstance(d, StructDecl)]

    @property
    def predicates(self) -> list[PredicateDecl]:
        return [d for d in self.decls if isinstance(d, PredicateDecl)]

    @property
    def functions(self) -> list[FunctionDecl]:
        return [d for d in self.decls if isinstance(d, FunctionDecl)]

    @property
    def methods(self) -> list[MethodDecl]:
        return [d for d in self.decls if isinstance(d, MethodDecl)]


# ---------------------------------------------------------------------------
# Traversal helpers

def children(node: Node) -> Iterator[Node]:
    match node:
        case FieldAccess(obj=o):
            yield o
        case Unary(arg=a):
            yield a
        case Binary(left=l, right=r):
            yield l
            yield r
        case Ternary(cond=c, then=t, other=o):
            yield c
            yield t
            yield o
        case Call(args=args):
            yield from args
        case Unfolding(args=args, body=b):
            yield from args
            yield b
        case Pure(expr=e):
            yield e
        case Acc(target=t):
            yield t
        case PredInst(args=args):
            yield from args
        case Conj(left=l, right=r):
            yield l
            yield r
        case CondF(cond=c, then=t, other=o):
            yield c
            yield t
            yield o
        case GradualFormula(body=b):
            yield b
        case Block(stmts=ss):
            yield from ss
        case VarDecl(init=i):
            if i is not None:
                yield i
        case Assign(value=v):
            yield v
        case FieldWrite(target=t, value=v):
            yield t
            yield v
        case CallStmt(args=args):
            yield from args
        case If(cond=c, then=t, other=o):
            yield c
            yield t
            if o is not None:
                yield o
        case While(cond=c, invariants=invs, body=b):
            yield c
            yield from invs
            yield b
        case Assert(formula=f):
            yield f
        case Fold(args=args) | Unfold(args=args):
            yield from args
        case Return(value=v):
            if v is not None:
                yield v
        case FunctionDecl():
            yield from node.requires
            yield from node.ensures
            yield node.block
        case MethodDecl():
            yield from node.requires
            yield from node.ensures
            yield node.body
        case PredicateDecl(body=b):
            yield b
        case Program(decls=ds):
            yield from ds


def walk(node: Node) -> Iterator[Node]:
    yield node
    for c in children(node):
        yield from walk(c)


def subst_expr(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Capture-free substitution of variables (and `\\result` under key
    "\\result") by expressions.  Returns fresh nodes that keep source
    locations but carry no node id."""
    match e:
        case VarRef(name=n) if n in mapping:
            return mapping[n]
        case ResultRef() if "\\result" in mapping:
            return mapping["\\result"]
        case IntLit() | BoolLit() | NullLit() | VarRef() | ResultRef() | Alloc():
            return e
        case FieldAccess(obj=o, field=f):
            return FieldAccess(subst_expr(o, mapping), f, loc=e.loc, ty=e.ty)
        case Unary(op=op, arg=a):
            return Unary(op, subst_expr(a, mapping), loc=e.loc, ty=e.ty)
        case Binary(op=op, left=l, right=r):
            return Binary(op, subst_expr(l, mapping), subst_expr(r, mapping), loc=e.loc, ty=e.ty)
        case Ternary(cond=c, then=t, other=o):
            return Ternary(subst_expr(c, mapping), subst_expr(t, mapping),
                           subst_expr(o, mapping), loc=e.loc, ty=e.ty)
        case Call(name=n, args=args):
            return Call(n, [subst_expr(a, mapping) for a in args], loc=e.loc, ty=e.ty)
        case Unfolding(pred=p, args=args, body=b):
            return Unfolding(p, [subst_expr(a, mapping) for a in args],
                             subst_expr(b, mapping), loc=e.loc, ty=e.ty)
    raise TypeError(f"cannot substitute in {e!r}")


def subst_formula(f: Formula, mapping: dict[str, Expr]) -> Formula:
    match f:
        case Pure(expr=e):
            return Pure(subst_expr(e, mapping), loc=f.loc)
        case Acc(target=t):
            return Acc(subst_expr(t, mapping), loc=f.loc)
        case PredInst(name=n, args=args):
            return PredInst(n, [subst_expr(a, mapping) for a in args], loc=f.loc)
        case Conj(left=l, right=r):
            return Conj(subst_formula(l, mapping), subst_formula(r, mapping), loc=f.loc)
        case CondF(cond=c, then=t, other=o):
            return CondF(subst_expr(c, mapping), subst_formula(t, mapping),
                         subst_formula(o, mapping), loc=f.loc)
    raise TypeError(f"cannot substitute in {f!r}")


def negate(e: Expr) -> Expr:
    if isinstance(e, Unary) and e.op == "!":
        return e.arg
    return Unary("!", e, loc=e.loc, ty=BOOL)
