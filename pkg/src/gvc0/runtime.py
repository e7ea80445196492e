"""Reference interpreter that enforces residual run-time checks.

The interpreter runs the same typed program the verifier saw; checks are
looked up by their anchor (node id, phase).  Dynamic `acc` checks test that
the receiver is non-null and allocated; ownership is not tracked.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import GvError
from .frontend import TypedProgram
from .printer import expr_str
from .state import Anchor, Guard, RuntimeCheck
from .syntax import (
    BOOL, INT, Acc, Alloc, Assert, Assign, Binary, Block, BoolLit, Call, CallStmt, CondF, Conj,
    Expr, FieldAccess, FieldWrite, Fold, Formula, FunctionDecl, GradualFormula, If, IntLit,
    MethodDecl, NullLit, PredInst, Pure, RefType, ResultRef, Return, Stmt, Ternary, Type, Unary,
    Unfold, Unfolding, VarDecl, VarRef, While,
)

STEP_BUDGET = 10_000_000
CALL_DEPTH = 500
PREDICATE_DEPTH = 10_000


@dataclass(frozen=True)
class Ref:
    addr: int

    def __str__(self) -> str:
        return f"#{self.addr}"


Value = Union[int, bool, Ref, None]


def show(v: Value) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


class RuntimeFault(GvError):
    """Null dereference, division by zero or a similar run-time error."""


class BudgetExceeded(GvError):
    pass


class CheckFailure(GvError):
    def __init__(self, check: RuntimeCheck, env: dict[str, Value], stack: list[str]):
        where = f" (from call to {check.origin.callee})" if check.origin else ""
        super().__init__(f"run-time check failed: {check.kind} {check.text}{where}", check.loc)
        self.check = check
        self.env = {k: show(v) for k, v in env.items()}
        self.stack = list(stack)


class _Return(Exception):
    def __init__(self, value: Value):
        self.value = value


@dataclass
class ConcreteHeap:
    objects: dict[int, dict[str, Value]] = field(default_factory=dict)
    _next: itertools.count = field(default_factory=lambda: itertools.count(1))

    def alloc(self, fields: dict[str, Value]) -> Ref:
        r = Ref(next(self._next))
        self.objects[r.addr] = dict(fields)
        return r

    def allocated(self, r: Value) -> bool:
        return isinstance(r, Ref) and r.addr in self.objects

    def read(self, r: Value, fname: str, loc) -> Value:
        if r is None:
            raise RuntimeFault(f"null dereference reading ->{fname}", loc)
        if not self.allocated(r):
            raise RuntimeFault(f"access to unallocated address {r}", loc)
        return self.objects[r.addr][fname]

    def write(self, r: Value, fname: str, v: Value, loc) -> None:
        if r is None:
            raise RuntimeFault(f"null dereference writing ->{fname}", loc)
        if not self.allocated(r):
            raise RuntimeFault(f"access to unallocated address {r}", loc)
        self.objects[r.addr][fname] = v


def default_value(t: Type) -> Value:
    if isinstance(t, RefType):
        return None
    return 0 if t == INT else False


def parse_args(text: str, types: list[Type]) -> list[Value]:
    """Entry arguments from `6` or `true,null` style literals."""
    parts = [p.strip() for p in text.split(",")] if text.strip() else []
    if len(parts) != len(types):
        raise ValueError(f"expected {len(types)} argument(s), got {len(parts)}")
    out: list[Value] = []
    for p, t in zip(parts, types):
        if isinstance(t, RefType):
            if p.lower() not in ("null", "NULL"):
                raise ValueError(f"reference arguments must be null, got {p!r}")
            out.append(None)
        elif t == BOOL:
            if p not in ("true", "false"):
                raise ValueError(f"expected a boolean, got {p!r}")
            out.append(p == "true")
        else:
            out.append(int(p))
    return out


def _c_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


@dataclass
class _Frame:
    name: str
    env: dict[str, Value]
    # most recent code-level decision: (anchor, condition text) -> taken
    decisions: dict[tuple[Anchor, str], bool] = field(default_factory=dict)


@dataclass
class RunStats:
    steps: int = 0
    checks_evaluated: int = 0
    checks_skipped: int = 0


class Interpreter:
    def __init__(self, tp: TypedProgram, checks: list[RuntimeCheck] = (),
                 step_budget: int = STEP_BUDGET, predicate_depth: int = PREDICATE_DEPTH,
                 call_depth: int = CALL_DEPTH, heap: Optional[ConcreteHeap] = None):
        self.tp = tp
        self.heap = heap or ConcreteHeap()
        self.table: dict[Anchor, list[RuntimeCheck]] = defaultdict(list)
        for c in checks:
            if c not in self.table[c.anchor]:
                self.table[c.anchor].append(c)
        self.step_budget = step_budget
        self.predicate_depth = predicate_depth
        self.call_depth = call_depth
        self.stats = RunStats()
        self.frames: list[_Frame] = []

    # -- bookkeeping ----------------------------------------------------------

    def _step(self, loc) -> None:
        self.stats.steps += 1
        if self.stats.steps > self.step_budget:
            raise BudgetExceeded(f"step budget of {self.step_budget} exceeded", loc)

    @property
    def frame(self) -> _Frame:
        return self.frames[-1]

    def _push(self, name: str, env: dict[str, Value], loc) -> None:
        if len(self.frames) >= self.call_depth:
            raise BudgetExceeded(f"call depth of {self.call_depth} exceeded", loc)
        self.frames.append(_Frame(name, env))

    def _decide(self, node, cond: Expr, taken: bool) -> bool:
        self.frame.decisions[((node.nid, "branch"), expr_str(cond))] = taken
        return taken

    # -- residual checks --------------------------------------------------------

    def _guard_holds(self, g: Guard) -> bool:
        if g.anchor[1] == "branch":
            taken = self.frame.decisions.get((g.anchor, g.cond_text))
            return taken is not None and taken == g.positive
        try:
            return bool(self.eval(g.expr)) == g.positive
        except GvError:
            # unevaluable guard: run the check rather than skip it
            return True

    def run_checks(self, anchor: Anchor) -> None:
        for chk in self.table.get(anchor, ()):
            if not all(self._guard_holds(g) for g in chk.guards):
                self.stats.checks_skipped += 1
                continue
            self.stats.checks_evaluated += 1
            try:
                ok = self.holds(chk.condition)
            except (RuntimeFault, CheckFailure):
                ok = False
            if not ok:
                raise CheckFailure(chk, self.frame.env, [f.name for f in self.frames])

    # -- formulas -------------------------------------------------------------

    def holds(self, f: Union[Formula, GradualFormula]) -> bool:
        """Concrete truth of the precise part of a formula.  Predicate
        instances are unrolled with an explicit worklist."""
        if isinstance(f, GradualFormula):
            f = f.body
        pending: list[tuple[str, list[Value], int]] = []
        if not self._holds_shallow(f, pending, 0):
            return False
        while pending:
            name, args, depth = pending.pop()
            if depth > self.predicate_depth:
                raise BudgetExceeded(
                    f"predicate {name} unrolled beyond depth {self.predicate_depth}", f.loc)
            pd = self.tp.predicates[name]
            self._push(name, {p.name: v for p, v in zip(pd.params, args)}, pd.loc)
            try:
                ok = self._holds_shallow(pd.body.body, pending, depth)
            finally:
                self.frames.pop()
            if not ok:
                return False
        return True

    def _holds_shallow(self, f: Formula, pending, depth: int) -> bool:
        match f:
            case Pure(expr=e):
                return bool(self.eval(e))
            case Acc(target=fa):
                return self.heap.allocated(self.eval(fa.obj))
            case PredInst(name=n, args=args):
                pending.append((n, [self.eval(a) for a in args], depth + 1))
                return True
            case Conj(left=l, right=r):
                return self._holds_shallow(l, pending, depth) and \
                    self._holds_shallow(r, pending, depth)
            case CondF(cond=c, then=t, other=o):
                taken = self._decide(f, c, bool(self.eval(c)))
                return self._holds_shallow(t if taken else o, pending, depth)
        raise TypeError(f"not a formula: {f!r}")

    # -- expressions ------------------------------------------------------------

    def eval(self, e: Expr) -> Value:
        match e:
            case IntLit(value=v) | BoolLit(value=v):
                return v
            case NullLit():
                return None
            case VarRef(name=n):
                return self.frame.env[n]
            case ResultRef():
                return self.frame.env["\\result"]
            case Unary(op="!", arg=a):
                return not self.eval(a)
            case Unary(op="-", arg=a):
                return -self.eval(a)
            case Binary(op="&&", left=l, right=r):
                if self._decide(e, l, bool(self.eval(l))):
                    return bool(self.eval(r))
                return False
            case Binary(op="||", left=l, right=r):
                if self._decide(e, l, bool(self.eval(l))):
                    return True
                return bool(self.eval(r))
            case Binary(op=op, left=l, right=r):
                return self._binop(op, self.eval(l), self.eval(r), e)
            case Ternary(cond=c, then=t, other=o):
                return self.eval(t if self._decide(e, c, bool(self.eval(c))) else o)
            case FieldAccess(obj=o, field=fname):
                r = self.eval(o)
                self.run_checks((e.nid, ""))
                return self.heap.read(r, fname, e.loc)
            case Call(name=n, args=args):
                vals = [self.eval(a) for a in args]
                self.run_checks((e.nid, ""))
                return self.call_function(self.tp.functions[n], vals, e.loc)
            case Unfolding(body=b):
                return self.eval(b)
            case Alloc(struct=s):
                self._step(e.loc)
                return self.heap.alloc({f: default_value(t) for f, t in self.tp.structs[s].fields})
        raise TypeError(f"cannot evaluate {e!r}")

    def _binop(self, op: str, a, b, e: Expr) -> Value:
        match op:
            case "+":
                return a + b
            case "-":
                return a - b
            case "*":
                return a * b
            case "/" | "%":
                if b == 0:
                    raise RuntimeFault("division by zero", e.loc)
                q = _c_div(a, b)
                return q if op == "/" else a - b * q
            case "<":
                return a < b
            case "<=":
                return a <= b
            case ">":
                return a > b
            case ">=":
                return a >= b
            case "==":
                return a == b
            case "!=":
                return a != b
        raise TypeError(f"unknown operator {op}")

    # -- calls ------------------------------------------------------------------

    def call_function(self, f: FunctionDecl, args: list[Value], loc=None) -> Value:
        self._step(loc or f.loc)
        self._push(f.name, {p.name: v for p, v in zip(f.params, args)}, loc or f.loc)
        try:
            if not self.holds(f.pre):
                raise CheckFailure(_pre_check(f, loc), self.frame.env,
                                   [fr.name for fr in self.frames])
            self.run_checks((f.nid, "entry"))
            if f.body is not None:
                result = self.eval(f.body)
            else:
                try:
                    self.exec_block(f.block)
                    raise RuntimeFault(f"function {f.name} ended without returning", f.loc)
                except _Return as r:
                    result = r.value
            self.frame.env["\\result"] = result
            self.run_checks((f.nid, "exit"))
            return result
        finally:
            self.frames.pop()

    def call_method(self, m: MethodDecl, args: list[Value], loc=None) -> Value:
        self._step(loc or m.loc)
        self._push(m.name, {p.name: v for p, v in zip(m.params, args)}, loc or m.loc)
        try:
            self.run_checks((m.nid, "entry"))
            result: Value = None
            try:
                self.exec_block(m.body)
            except _Return as r:
                result = r.value
            self.frame.env["\\result"] = result
            self.run_checks((m.nid, "exit"))
            return result
        finally:
            self.frames.pop()

    # -- statements -------------------------------------------------------------

    def exec_block(self, b: Block) -> None:
        for s in b.stmts:
            self.exec(s)

    def exec(self, s: Stmt) -> None:
        self._step(s.loc)
        env = self.frame.env
        match s:
            case Block():
                self.exec_block(s)
            case VarDecl(type=t, name=n, init=None):
                env[n] = default_value(t)
            case VarDecl(name=n, init=e) | Assign(target=n, value=e):
                env[n] = self.eval(e)
            case FieldWrite(target=fa, value=e):
                r = self.eval(fa.obj)
                v = self.eval(e)
                self.run_checks((fa.nid, ""))
                self.heap.write(r, fa.field, v, fa.loc)
            case CallStmt(target=t, name=n, args=args):
                vals = [self.eval(a) for a in args]
                self.run_checks((s.nid, ""))
                result = self.call_method(self.tp.methods[n], vals, s.loc)
                if t is not None:
                    env[t] = result
                self.run_checks((s.nid, "post"))
            case If(cond=c, then=t, other=o):
                if self._decide(s, c, bool(self.eval(c))):
                    self.exec_block(t)
                elif o is not None:
                    self.exec_block(o)
            case While(cond=c, body=b):
                self.run_checks((s.nid, "entry"))
                while True:
                    self._step(s.loc)
                    self.run_checks((s.nid, "body"))
                    if not self._decide(s, c, bool(self.eval(c))):
                        break
                    self.exec_block(b)
                    self.run_checks((s.nid, "iter"))
                self.run_checks((s.nid, "exit"))
            case Assert() | Fold() | Unfold():
                self.run_checks((s.nid, ""))
            case Return(value=e):
                raise _Return(None if e is None else self.eval(e))
            case _:
                raise TypeError(f"cannot execute {s!r}")


def _pre_check(f: FunctionDecl, loc) -> RuntimeCheck:
    from .state import make_check
    return make_check("pre", f.pre.body, loc or f.loc, (f.nid, "entry"))


def interpret(tp: TypedProgram, report, entry: str, args: list[Value],
              step_budget: int = STEP_BUDGET) -> tuple[Value, Interpreter]:
    """Run `entry` with the report's residual checks enforced."""
    if entry not in tp.methods:
        raise KeyError(f"no method named {entry}")
    m = tp.methods[entry]
    if len(args) != len(m.params):
        raise ValueError(f"{entry} expects {len(m.params)} argument(s)")
    checks = report.all_checks if report is not None else []
    it = Interpreter(tp, checks, step_budget=step_budget)
    return it.call_method(m, args), it


def eval_pure_concrete(tp: TypedProgram, f: Union[str, FunctionDecl], args: list[Value],
                       heap: Optional[ConcreteHeap] = None,
                       checks: list[RuntimeCheck] = ()) -> Value:
    """Direct recursive evaluation of a pure function on a concrete heap."""
    decl = tp.functions[f] if isinstance(f, str) else f
    it = Interpreter(tp, checks, heap=heap)
    return it.call_function(decl, list(args))
