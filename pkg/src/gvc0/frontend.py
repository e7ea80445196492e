"""Name resolution, type checking, purity and framing checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import PurityError, TypeCheckError
from .parser import parse
from .printer import expr_str
from .syntax import (
    BOOL, INT, NULLT, VOID, Acc, Alloc, Assert, Assign, Binary, Block, BoolLit, Call,
    CallStmt, CondF, Conj, Expr, FieldAccess, FieldWrite, Fold, Formula, FunctionDecl,
    GradualFormula, If, IntLit, MethodDecl, Node, NullLit, Param, PredicateDecl, PredInst,
    Program, Pure, RefType, ResultRef, Return, Stmt, StructDecl, Ternary, Type, Typedef, Unary,
    Unfold, Unfolding, VarDecl, VarRef, While, children, subst_formula, walk,
)


@dataclass
class TypedProgram:
    program: Program
    structs: dict[str, StructDecl] = field(default_factory=dict)
    predicates: dict[str, PredicateDecl] = field(default_factory=dict)
    functions: dict[str, FunctionDecl] = field(default_factory=dict)
    methods: dict[str, MethodDecl] = field(default_factory=dict)

    def field_type(self, struct: str, name: str) -> Optional[Type]:
        s = self.structs.get(struct)
        return s.field_type(name) if s else None


def compatible(a: Type, b: Type) -> bool:
    if a == b:
        return True
    return (a == NULLT and isinstance(b, RefType)) or (b == NULLT and isinstance(a, RefType))


class _Checker:
    def __init__(self, prog: Program):
        self.tp = TypedProgram(prog)
        self.params: set[str] = set()
        # ids for statements synthesised during checking
        self.next_id = max((n.nid for n in walk(prog)), default=0) + 1

    def fail(self, msg: str, node: Node) -> None:
        raise TypeCheckError(msg, node.loc)

    # -- declarations --------------------------------------------------------

    def run(self) -> TypedProgram:
        tp = self.tp
        callables: dict[str, Node] = {}
        for d in tp.program.decls:
            if isinstance(d, StructDecl):
                if d.name in tp.structs:
                    self.fail(f"duplicate struct {d.name}", d)
                names = [f for f, _ in d.fields]
                if len(set(names)) != len(names):
                    self.fail(f"duplicate field in struct {d.name}", d)
                tp.structs[d.name] = d
            elif isinstance(d, Typedef):
                continue
            else:
                if d.name in callables:
                    self.fail(f"duplicate declaration of {d.name}", d)
                callables[d.name] = d
                table = {PredicateDecl: tp.predicates, FunctionDecl: tp.functions,
                         MethodDecl: tp.methods}[type(d)]
                table[d.name] = d
        for s in tp.structs.values():
            for _, t in s.fields:
                self.check_type(t, s)
        for p in tp.predicates.values():
            env = self.param_env(p.params)
            self.check_gradual(p.body, env, result=None)
            self.audit(p.body, set(), f"predicate {p.name}")
        for f in tp.functions.values():
            self.check_function(f)
        for m in tp.methods.values():
            self.check_method(m)
        return tp

    def check_type(self, t: Type, node: Node) -> None:
        if isinstance(t, RefType) and t.struct not in self.tp.structs:
            self.fail(f"unknown struct {t.struct}", node)

    def param_env(self, params: list[Param]) -> dict[str, Type]:
        env: dict[str, Type] = {}
        for p in params:
            self.check_type(p.type, p)
            if p.name in env:
                self.fail(f"duplicate parameter {p.name}", p)
            env[p.name] = p.type
        return env

    def check_function(self, f: FunctionDecl) -> None:
        self.check_type(f.ret, f)
        if f.ret == VOID:
            self.fail(f"pure function {f.name} must return a value", f)
        env = self.param_env(f.params)
        self.params = set(env)
        for r in f.requires:
            self.check_gradual(r, env, result=None)
        for e in f.ensures:
            self.check_gradual(e, env, result=f.ret)
        pre = f.pre
        framed = self.audit(pre, set(), f"precondition of {f.name}")
        self.audit(f.post, framed if not pre.imprecise else None, f"postcondition of {f.name}")
        self.check_block(f.block, dict(env), f.ret)
        check_purity(f)

    def check_method(self, m: MethodDecl) -> None:
        self.check_type(m.ret, m)
        env = self.param_env(m.params)
        self.params = set(env)
        for r in m.requires:
            self.check_gradual(r, env, result=None)
        for e in m.ensures:
            self.check_gradual(e, env, result=None if m.ret == VOID else m.ret)
        self.audit(m.pre, set(), f"precondition of {m.name}")
        self.audit(m.post, set(), f"postcondition of {m.name}")
        self.check_block(m.body, dict(env), m.ret)

    # -- formulas ------------------------------------------------------------

    def check_gradual(self, g: GradualFormula, env, result: Optional[Type]) -> None:
        self.check_formula(g.body, env, result)

    def check_formula(self, f: Formula, env, result: Optional[Type]) -> None:
        match f:
            case Pure(expr=e):
                self.expect(e, BOOL, env, result, spec=True)
            case Acc(target=t):
                self.expr(t, env, result, spec=True)
            case PredInst(name=n, args=args):
                self.check_pred_args(n, args, env, result, f)
            case Conj(left=l, right=r):
                self.check_formula(l, env, result)
                self.check_formula(r, env, result)
            case CondF(cond=c, then=t, other=o):
                self.expect(c, BOOL, env, result, spec=True)
                self.check_formula(t, env, result)
                self.check_formula(o, env, result)

    def check_pred_args(self, name, args, env, result, node, spec=True) -> None:
        p = self.tp.predicates.get(name)
        if p is None:
            self.fail(f"unknown predicate {name}", node)
        if len(args) != len(p.params):
            self.fail(f"predicate {name} expects {len(p.params)} arguments", node)
        for a, prm in zip(args, p.params):
            self.expect(a, prm.type, env, result, spec)

    # -- expressions ---------------------------------------------------------

    def expect(self, e: Expr, t: Type, env, result, spec: bool) -> None:
        got = self.expr(e, env, result, spec)
        if not compatible(got, t):
            self.fail(f"type mismatch: expected {t}, got {got}", e)

    def expr(self, e: Expr, env, result: Optional[Type], spec: bool) -> Type:
        t = self._expr(e, env, result, spec)
        e.ty = t
        return t

    def _expr(self, e: Expr, env, result, spec) -> Type:
        match e:
            case IntLit():
                return INT
            case BoolLit():
                return BOOL
            case NullLit():
                return NULLT
            case VarRef(name=n):
                if n not in env:
                    self.fail(f"unbound variable {n}", e)
                return env[n]
            case ResultRef():
                if result is None:
                    self.fail("\\result is only allowed in postconditions", e)
                return result
            case FieldAccess(obj=o, field=f):
                ot = self.expr(o, env, result, spec)
                if not isinstance(ot, RefType):
                    self.fail(f"field access on non-reference of type {ot}", e)
                ft = self.tp.field_type(ot.struct, f)
                if ft is None:
                    self.fail(f"struct {ot.struct} has no field {f}", e)
                return ft
            case Unary(op="!", arg=a):
                self.expect(a, BOOL, env, result, spec)
                return BOOL
            case Unary(op="-", arg=a):
                self.expect(a, INT, env, result, spec)
                return INT
            case Binary(op=op, left=l, right=r):
                if op in ("&&", "||"):
                    self.expect(l, BOOL, env, result, spec)
                    self.expect(r, BOOL, env, result, spec)
                    return BOOL
                if op in ("==", "!="):
                    lt = self.expr(l, env, result, spec)
                    rt = self.expr(r, env, result, spec)
                    if not compatible(lt, rt):
                        self.fail(f"cannot compare {lt} with {rt}", e)
                    return BOOL
                self.expect(l, INT, env, result, spec)
                self.expect(r, INT, env, result, spec)
                return BOOL if op in ("<", "<=", ">", ">=") else INT
            case Ternary(cond=c, then=t, other=o):
                self.expect(c, BOOL, env, result, spec)
                tt = self.expr(t, env, result, spec)
                ot = self.expr(o, env, result, spec)
                if not compatible(tt, ot):
                    self.fail(f"ternary branches differ: {tt} vs {ot}", e)
                return ot if tt == NULLT else tt
            case Call(name=n, args=args):
                if n in self.tp.methods:
                    if spec:
                        self.fail(f"method in specification: {n}", e)
                    self.fail(f"method call {n} must be a statement", e)
                if n in self.tp.predicates:
                    self.fail(f"predicate {n} used as an expression", e)
                f = self.tp.functions.get(n)
                if f is None:
                    self.fail(f"unknown function {n}", e)
                if len(args) != len(f.params):
                    self.fail(f"function {n} expects {len(f.params)} arguments", e)
                for a, p in zip(args, f.params):
                    self.expect(a, p.type, env, result, spec)
                return f.ret
            case Unfolding(pred=p, args=args, body=b):
                self.check_pred_args(p, args, env, result, e, spec)
                return self.expr(b, env, result, spec)
            case Alloc():
                self.fail("alloc is only allowed as the right-hand side of an assignment", e)
        self.fail(f"unsupported expression {type(e).__name__}", e)
        raise AssertionError

    # -- statements ----------------------------------------------------------

    def check_block(self, b: Block, env: dict, ret: Type) -> None:
        out: list[Stmt] = []
        for s in b.stmts:
            out.extend(self.stmt(s, env, ret))
        b.stmts[:] = out

    def rhs(self, value: Expr, t: Type, env, node) -> None:
        if isinstance(value, Alloc):
            if value.struct not in self.tp.structs:
                self.fail(f"unknown struct {value.struct}", value)
            value.ty = RefType(value.struct)
            if not compatible(value.ty, t):
                self.fail(f"type mismatch: expected {t}, got {value.ty}", value)
            return
        self.expect(value, t, env, None, spec=False)

    def method_call(self, target: Optional[str], call: Call, env, node) -> CallStmt:
        m = self.tp.methods[call.name]
        if len(call.args) != len(m.params):
            self.fail(f"method {m.name} expects {len(m.params)} arguments", call)
        for a, p in zip(call.args, m.params):
            self.expect(a, p.type, env, None, spec=False)
        if target is not None and not compatible(m.ret, env[target]):
            self.fail(f"type mismatch: expected {env[target]}, got {m.ret}", call)
        nid = node.nid
        if not isinstance(node, CallStmt):
            nid, self.next_id = self.next_id, self.next_id + 1
        return CallStmt(target, call.name, call.args, loc=node.loc, nid=nid)

    def stmt(self, s: Stmt, env: dict, ret: Type) -> list[Stmt]:
        match s:
            case Block():
                self.check_block(s, dict(env), ret)
            case VarDecl(type=t, name=n, init=i):
                self.check_type(t, s)
                if n in env:
                    self.fail(f"variable {n} is already declared", s)
                env[n] = t
                if isinstance(i, Call) and i.name in self.tp.methods:
                    s.init = None
                    return [s, self.method_call(n, i, env, s)]
                if i is not None:
                    self.rhs(i, t, env, s)
            case Assign(target=t, value=v):
                if t not in env:
                    self.fail(f"unbound variable {t}", s)
                if t in self.params:
                    self.fail(f"cannot assign to parameter {t}", s)
                if isinstance(v, Call) and v.name in self.tp.methods:
                    return [self.method_call(t, v, env, s)]
                self.rhs(v, env[t], env, s)
            case FieldWrite(target=t, value=v):
                ft = self.expr(t, env, None, spec=False)
                self.rhs(v, ft, env, s)
            case CallStmt(target=None, name=n, args=args):
                if n not in self.tp.methods:
                    self.fail(f"unknown method {n}", s)
                return [self.method_call(None, Call(n, args, loc=s.loc), env, s)]
            case If(cond=c, then=t, other=o):
                self.expect(c, BOOL, env, None, spec=False)
                self.check_block(t, dict(env), ret)
                if o is not None:
                    self.check_block(o, dict(env), ret)
            case While(cond=c, invariants=invs, body=b):
                self.expect(c, BOOL, env, None, spec=False)
                for inv in invs:
                    self.check_gradual(inv, env, None)
                self.audit(s.invariant, set(), "loop invariant")
                self.check_block(b, dict(env), ret)
            case Assert(formula=f):
                self.check_gradual(f, env, None)
            case Fold(pred=p, args=args) | Unfold(pred=p, args=args):
                self.check_pred_args(p, args, env, None, s, spec=True)
            case Return(value=v):
                if v is None:
                    if ret != VOID:
                        self.fail("missing return value", s)
                elif ret == VOID:
                    self.fail("void method returns a value", s)
                else:
                    self.expect(v, ret, env, None, spec=False)
            case _:
                self.fail(f"unsupported statement {type(s).__name__}", s)
        return [s]

    # -- framing -------------------------------------------------------------

    def audit(self, g: GradualFormula, framed: Optional[set[str]], what: str) -> set[str]:
        """Syntactic self-framing audit; `framed=None` means everything is framed."""
        if g.imprecise or framed is None:
            return set()
        missing = framing_audit(g.body, set(framed), self.tp)
        if missing:
            raise TypeCheckError(f"{what} is not self-framed: {expr_str(missing[0])}",
                                 missing[0].loc)
        return _framed_after(g.body, set(framed), self.tp)


def _reads(e: Expr, framed: set[str], tp: TypedProgram, out: list[FieldAccess]) -> None:
    match e:
        case FieldAccess(obj=o):
            _reads(o, framed, tp, out)
            if expr_str(e) not in framed:
                out.append(e)
        case Unfolding(pred=p, args=args, body=b):
            for a in args:
                _reads(a, framed, tp, out)
            pd = tp.predicates.get(p)
            inner = set(framed)
            if pd is not None:
                body = subst_formula(pd.body.body, {prm.name: a for prm, a in zip(pd.params, args)})
                inner = _framed_after(body, inner, tp)
            _reads(b, inner, tp, out)
        case _:
            for c in children(e):
                _reads(c, framed, tp, out)


def _framed_after(f: Formula, framed: set[str], tp) -> set[str]:
    match f:
        case Acc(target=t):
            return framed | {expr_str(t)}
        case Conj(left=l, right=r):
            return _framed_after(r, _framed_after(l, framed, tp), tp)
        case CondF(then=t, other=o):
            return _framed_after(t, framed, tp) & _framed_after(o, framed, tp)
    return framed


def framing_audit(f: Formula, framed: set[str], tp: TypedProgram) -> list[FieldAccess]:
    """Heap reads in `f` not covered by an `acc` to their left."""
    out: list[FieldAccess] = []
    match f:
        case Pure(expr=e):
            _reads(e, framed, tp, out)
        case Acc(target=t):
            _reads(t.obj, framed, tp, out)
        case PredInst(args=args):
            for a in args:
                _reads(a, framed, tp, out)
        case Conj(left=l, right=r):
            out += framing_audit(l, framed, tp)
            out += framing_audit(r, _framed_after(l, framed, tp), tp)
        case CondF(cond=c, then=t, other=o):
            _reads(c, framed, tp, out)
            out += framing_audit(t, framed, tp)
            out += framing_audit(o, framed, tp)
    return out


_IMPURE = {Assign: "assignment", FieldWrite: "field write", CallStmt: "method call",
           Fold: "fold statement", Unfold: "unfold statement", VarDecl: "local declaration",
           If: "if statement", While: "loop", Assert: "assert statement"}


def check_purity(f: FunctionDecl) -> None:
    """Raise PurityError unless the function body is a single side-effect free
    `return e;`.  Unfolding expressions and self-calls are allowed."""
    for node in walk(f.block):
        if isinstance(node, Alloc):
            raise PurityError(f"impure construct in {f.name}: alloc", node.loc)
        for cls, what in _IMPURE.items():
            if isinstance(node, cls):
                raise PurityError(f"impure construct in {f.name}: {what}", node.loc)
    if f.body is None:
        raise PurityError(f"pure function {f.name} must consist of a single return", f.loc)


def resolve_and_typecheck(prog: Program) -> TypedProgram:
    return _Checker(prog).run()


def load(source: str) -> TypedProgram:
    return resolve_and_typecheck(parse(source))
