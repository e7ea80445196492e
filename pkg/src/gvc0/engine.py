"""Gradual symbolic execution: eval, produce and consume.

Every primitive returns the list of feasible branches it explores instead of
taking a continuation.  Static failures raise VerificationFailure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ExtensionFailure, InternalError, VerificationFailure
from .frontend import TypedProgram
from .printer import expr_str, formula_str
from .smt import SolverSession, Validity
from .state import (
    Anchor, CheckOrigin, FieldChunk, PredicateChunk, RuntimeCheck, SymbolicState,
    heap_lookup, make_check, make_guard, predicate_lookup, record_check, remove_chunk,
    add_optimistic_chunk,
)
from .syntax import (
    BOOL, INT, Acc, Alloc, Binary, BoolLit, Call, CondF, Conj, Expr, FieldAccess, Formula,
    GradualFormula, IntLit, Loc, NullLit, PredInst, Pure, RefType, ResultRef, Ternary, Type,
    Unary, Unfolding, VarRef, subst_expr, subst_formula, walk,
)
from .terms import (
    FALSE, NULL, REF, SNAP, TRUE, FreshSymbols, Leaf, Pair, Snapshot, Term, Unit, lit, mk_and,
    mk_arith, mk_cmp, mk_div, mk_eq, mk_ite, mk_mod, mk_neg, mk_not, mk_or, split, unwrap,
)

Branches = list[tuple[SymbolicState, Term]]


def sort_of(t: Type) -> str:
    if isinstance(t, RefType):
        return REF
    if t == INT:
        return "Int"
    if t == BOOL:
        return "Bool"
    raise InternalError(f"no sort for type {t}")


@dataclass(frozen=True)
class Site:
    """Where obligations of a specification are checked at run time.

    `subst` maps the formula's free variables to caller source expressions so
    that recorded conditions and guards are in caller-visible terms.
    """
    kind: str
    anchor: Anchor
    loc: Loc
    subst: dict = field(default_factory=dict, compare=False)
    origin: Optional[CheckOrigin] = None

    def src(self, e: Expr) -> Expr:
        return subst_expr(e, self.subst) if self.subst else e

    def src_formula(self, f: Formula) -> Formula:
        return subst_formula(f, self.subst) if self.subst else f


_FAILURE_TEXT = {
    "pre": "precondition might not hold",
    "post": "postcondition might not hold",
    "invariant": "loop invariant might not hold",
    "assert": "assertion might not hold",
    "predicate": "predicate body might not hold",
    "field-access": "insufficient permission",
}


def _simple(e: Expr) -> bool:
    """No heap reads, calls or unfoldings: evaluation cannot fail or record checks."""
    return not any(isinstance(n, (FieldAccess, Call, Unfolding, Alloc)) for n in walk(e))


class Engine:
    def __init__(self, tp: TypedProgram, session: SolverSession,
                 fresh: Optional[FreshSymbols] = None):
        self.tp = tp
        self.session = session
        self.fresh = fresh or FreshSymbols()
        # checks from every explored path, in recording order
        self.collected: list[RuntimeCheck] = []
        # function verifier hook for heap misses (snapshot extension)
        self.extender = None
        # name of the function whose well-definedness is being checked
        self.current_function: Optional[str] = None
        # function name -> FunctionInfo, filled by the function verifier
        self.functions: dict = {}
        # function name -> reason it is unusable
        self.unusable: dict[str, str] = {}
        # functions in the same call-graph component as current_function
        self.scc: set[str] = set()

    # -- helpers ------------------------------------------------------------

    def field_sort(self, fa: FieldAccess) -> str:
        obj_ty = fa.obj.ty
        if not isinstance(obj_ty, RefType):
            raise InternalError(f"field access on untyped receiver: {expr_str(fa)}")
        ft = self.tp.field_type(obj_ty.struct, fa.field)
        if ft is None:
            raise InternalError(f"unknown field {fa.field}")
        return sort_of(ft)

    def record(self, st: SymbolicState, check: RuntimeCheck) -> SymbolicState:
        st = record_check(st, check)
        self.collected.append(st.checks[-1])
        return st

    def valid(self, st: SymbolicState, t: Term) -> Validity:
        if t == TRUE:
            return Validity.VALID
        return self.session.check_valid(st.pc, t)

    def branch(self, st: SymbolicState, cond: Term, expr: Expr,
               anchor: Anchor) -> list[tuple[SymbolicState, bool]]:
        """Split on `cond`; infeasible sides are pruned (unknown keeps both)."""
        if cond == TRUE:
            return [(st, True)]
        if cond == FALSE:
            return [(st, False)]
        out = []
        for positive, c in ((True, cond), (False, mk_not(cond))):
            if self.session.check_sat(list(st.pc) + [c]) == "unsat":
                continue
            g = make_guard(anchor, expr, positive, c)
            nxt = st.assume(c)
            out.append((replace(nxt, branches=nxt.branches + (g,)), positive))
        return out

    def _branch_anchor(self, owner, cond: Expr, site: Optional[Site]) -> tuple[Anchor, Expr]:
        """Code-level branches are keyed by the branching node, specification
        branches by the site where the specification is checked."""
        if site is not None:
            return site.anchor, site.src(cond)
        return (owner.nid, "branch"), cond

    def seq(self, st: SymbolicState, exprs: list[Expr],
            site: Optional[Site]) -> list[tuple[SymbolicState, list[Term]]]:
        out: list[tuple[SymbolicState, list[Term]]] = [(st, [])]
        for e in exprs:
            nxt = []
            for s, ts in out:
                for s2, t in self.eval(s, e, site):
                    nxt.append((s2, ts + [t]))
            out = nxt
        return out

    # -- eval ---------------------------------------------------------------

    def eval(self, st: SymbolicState, e: Expr, site: Optional[Site] = None) -> Branches:
        match e:
            case IntLit(value=v):
                return [(st, lit(v))]
            case BoolLit(value=v):
                return [(st, lit(v))]
            case NullLit():
                return [(st, NULL)]
            case VarRef(name=n):
                if n not in st.store:
                    raise InternalError(f"unbound variable {n} during symbolic execution")
                return [(st, st.store[n])]
            case ResultRef():
                if "\\result" not in st.store:
                    raise InternalError("\\result is not bound")
                return [(st, st.store["\\result"])]
            case Unary(op=op, arg=a):
                f = mk_not if op == "!" else mk_neg
                return [(s, f(t)) for s, t in self.eval(st, a, site)]
            case Binary(op="&&" | "||"):
                return self._eval_logic(st, e, site)
            case Binary(op=op, left=l, right=r):
                return [(s, _binop(op, a, b)) for s, (a, b) in self.seq(st, [l, r], site)]
            case Ternary():
                return self._eval_ternary(st, e, site)
            case FieldAccess(obj=o):
                out = []
                for s, r in self.eval(st, o, site):
                    found = heap_lookup(self.session, s, r, e.field)
                    if found is not None:
                        out.append((s, found[1].value))
                    else:
                        out.append(self.missing_field(s, r, e, site))
                return out
            case Call():
                from .funcs import eval_funcapp
                return eval_funcapp(self, st, e, site)
            case Unfolding():
                return self._eval_unfolding(st, e, site)
            case Alloc(struct=name):
                return [self.alloc(st, name)]
        raise InternalError(f"cannot evaluate {e!r}")

    def _eval_logic(self, st, e: Binary, site) -> Branches:
        is_and = e.op == "&&"
        join = mk_and if is_and else mk_or
        if _simple(e.right):
            return [(s, join(a, b)) for s, (a, b) in self.seq(st, [e.left, e.right], site)]
        out: Branches = []
        anchor, gexpr = self._branch_anchor(e, e.left, site)
        for s, lt in self.eval(st, e.left, site):
            for s2, positive in self.branch(s, lt, gexpr, anchor):
                if positive == is_and:
                    out.extend(self.eval(s2, e.right, site))
                else:
                    out.append((s2, lit(not is_and)))
        return out

    def _eval_ternary(self, st, e: Ternary, site) -> Branches:
        if _simple(e.then) and _simple(e.other):
            return [(s, mk_ite(c, a, b))
                    for s, (c, a, b) in self.seq(st, [e.cond, e.then, e.other], site)]
        out: Branches = []
        anchor, gexpr = self._branch_anchor(e, e.cond, site)
        for s, c in self.eval(st, e.cond, site):
            for s2, positive in self.branch(s, c, gexpr, anchor):
                out.extend(self.eval(s2, e.then if positive else e.other, site))
        return out

    def _eval_unfolding(self, st, e: Unfolding, site) -> Branches:
        inner_site = site or Site("predicate", (e.nid, ""), e.loc)
        out: Branches = []
        for s1, args in self.seq(st, e.args, site):
            inst = PredInst(e.pred, e.args, loc=e.loc)
            for s2, snap in self._consume_pred(s1, inst, args, inner_site):
                for s3 in self.produce_predicate_body(s2, e.pred, e.args, args, snap, inner_site):
                    s3 = replace(s3, store=s1.store)
                    for s4, v in self.eval(s3, e.body, site):
                        # unfolding expressions leave the heap as they found it
                        out.append((replace(s4, heap=s1.heap, opt_heap=s1.opt_heap,
                                            imprecise=s1.imprecise), v))
        return out

    def alloc(self, st: SymbolicState, struct: str) -> tuple[SymbolicState, Term]:
        r = self.fresh(REF, struct.lower())
        others = [c.receiver for c in st.heap + st.opt_heap if isinstance(c, FieldChunk)]
        others += [t for t in st.store.values() if t.sort == REF]
        facts = [mk_not(mk_eq(r, NULL))]
        for o in dict.fromkeys(others):
            facts.append(mk_not(mk_eq(r, o)))
        chunks = []
        for fname, fty in self.tp.structs[struct].fields:
            default = NULL if isinstance(fty, RefType) else lit(0) if fty == INT else FALSE
            chunks.append(FieldChunk(r, fname, default))
        st = replace(st, heap=st.heap + tuple(chunks)).assume(*facts)
        return st, r

    def missing_field(self, st: SymbolicState, r: Term, fa: FieldAccess,
                      site: Optional[Site]) -> tuple[SymbolicState, Term]:
        """A heap read found no chunk."""
        sort = self.field_sort(fa)
        if self.extender is not None:
            st, v = self.extender.extend(self, st, r, fa, sort)
            return st, v
        src = site.src(fa) if site else fa
        if st.imprecise:
            st, v = add_optimistic_chunk(self.session, self.fresh, st, r, fa.field, sort)
            anchor, loc = (site.anchor, site.loc) if site else ((fa.nid, ""), fa.loc)
            chk = make_check("field-access", Acc(src, loc=fa.loc), loc, anchor,
                             origin=site.origin if site else None)
            return self.record(st, chk), v
        raise VerificationFailure(f"insufficient permission to access {expr_str(src)}", fa.loc)

    # -- produce ------------------------------------------------------------

    def produce_g(self, st: SymbolicState, g: GradualFormula, snap: Optional[Snapshot],
                  site: Site) -> list[SymbolicState]:
        if g.imprecise:
            st = replace(st, imprecise=True)
        return self.produce(st, g.body, snap, site)

    def produce(self, st: SymbolicState, f: Formula, snap: Optional[Snapshot],
                site: Site) -> list[SymbolicState]:
        match f:
            case Pure(expr=e):
                return [s.assume(t) for s, t in self.eval(st, e, site)]
            case Acc(target=fa):
                sort = self.field_sort(fa)
                out = []
                for s, r in self.eval(st, fa.obj, site):
                    v = self._leaf_value(snap, sort, fa.field)
                    out.append(self.add_field_chunk(s, r, fa.field, v, site.src(fa), f.loc))
                return out
            case PredInst(name=n, args=args):
                out = []
                for s, ts in self.seq(st, args, site):
                    psnap = snap if snap is not None else Leaf(self.fresh(SNAP, n))
                    out.append(replace(s, heap=s.heap + (PredicateChunk(n, tuple(ts), psnap),)))
                return out
            case Conj(left=l, right=r):
                ls, rs = _split(snap)
                out = []
                for s in self.produce(st, l, ls, site):
                    out.extend(self.produce(s, r, rs, site))
                return out
            case CondF(cond=c, then=t, other=o):
                out = []
                for s, ct in self.eval(st, c, site):
                    for s2, positive in self.branch(s, ct, site.src(c), site.anchor):
                        out.extend(self.produce(s2, t if positive else o, snap, site))
                return out
        raise InternalError(f"cannot produce {f!r}")

    def _leaf_value(self, snap: Optional[Snapshot], sort: str, hint: str) -> Term:
        match snap:
            case None:
                return self.fresh(sort, hint)
            case Leaf(term=t):
                return unwrap(t, sort)
        raise InternalError(f"snapshot {snap!r} does not match an access")

    def add_field_chunk(self, st: SymbolicState, r: Term, fname: str, v: Term,
                        src: FieldAccess, loc: Loc) -> SymbolicState:
        found = heap_lookup(self.session, st, r, fname)
        facts = [mk_not(mk_eq(r, NULL))]
        if found is not None:
            which, old = found
            if which == "h":
                raise VerificationFailure(
                    f"heap conflict: permission to {expr_str(src)} is already held", loc)
            st = remove_chunk(st, which, old)
            facts.append(mk_eq(old.value, v))
        for c in st.heap:
            if isinstance(c, FieldChunk) and c.field == fname:
                facts.append(mk_not(mk_eq(r, c.receiver)))
        return replace(st, heap=st.heap + (FieldChunk(r, fname, v),)).assume(*facts)

    def produce_predicate_body(self, st: SymbolicState, name: str, src_args: list[Expr],
                               args: list[Term], snap: Snapshot,
                               site: Site) -> list[SymbolicState]:
        pd = self.tp.predicates[name]
        inner = Site(site.kind, site.anchor, site.loc,
                     {p.name: site.src(a) for p, a in zip(pd.params, src_args)}, site.origin)
        saved = st.store
        st = replace(st, store={p.name: t for p, t in zip(pd.params, args)})
        return [replace(s, store=saved) for s in self.produce_g(st, pd.body, snap, inner)]

    # -- consume ------------------------------------------------------------

    def consume_g(self, st: SymbolicState, g: GradualFormula,
                  site: Site) -> list[tuple[SymbolicState, Snapshot]]:
        # `?` contributes nothing statically; the precise part is consumed
        return self.consume(st, g.body, site)

    def _eval_in(self, st: SymbolicState, e: Expr, site: Site,
                 orig: tuple) -> Branches:
        """Evaluate against the heap as it was before consumption started, so
        that `acc(x->f) && x->f == v` reads the value just consumed."""
        h0, o0 = orig
        view = replace(st, heap=h0, opt_heap=o0 + tuple(c for c in st.opt_heap if c not in o0))
        out = []
        for s2, t in self.eval(view, e, site):
            new = tuple(c for c in s2.opt_heap if c not in view.opt_heap)
            out.append((replace(s2, heap=st.heap, opt_heap=st.opt_heap + new), t))
        return out

    def _seq_in(self, st, exprs, site, orig):
        out = [(st, [])]
        for e in exprs:
            out = [(s2, ts + [t]) for s, ts in out for s2, t in self._eval_in(s, e, site, orig)]
        return out

    def consume(self, st: SymbolicState, f: Formula, site: Site,
                orig: Optional[tuple] = None) -> list[tuple[SymbolicState, Snapshot]]:
        if orig is None:
            orig = (st.heap, st.opt_heap)
        match f:
            case Pure(expr=e):
                return [(self.require(s, t, Pure(site.src(e), loc=f.loc), site), Unit())
                        for s, t in self._eval_in(st, e, site, orig)]
            case Acc(target=fa):
                out = []
                for s, r in self._eval_in(st, fa.obj, site, orig):
                    found = heap_lookup(self.session, s, r, fa.field)
                    if found is not None:
                        out.append((remove_chunk(s, *found), Leaf(found[1].value)))
                    else:
                        s2, v = self.missing_acc(s, r, fa, site)
                        out.append((s2, Leaf(v)))
                return out
            case PredInst(args=args):
                out = []
                for s, ts in self._seq_in(st, args, site, orig):
                    out.extend(self._consume_pred(s, f, ts, site))
                return out
            case Conj(left=l, right=r):
                out = []
                for s, ls in self.consume(st, l, site, orig):
                    for s2, rs in self.consume(s, r, site, orig):
                        out.append((s2, Pair(ls, rs)))
                return out
            case CondF(cond=c, then=t, other=o):
                out = []
                for s, ct in self._eval_in(st, c, site, orig):
                    for s2, positive in self.branch(s, ct, site.src(c), site.anchor):
                        out.extend(self.consume(s2, t if positive else o, site, orig))
                return out
        raise InternalError(f"cannot consume {f!r}")

    def require(self, st: SymbolicState, t: Term, cond: Formula, site: Site) -> SymbolicState:
        """Check a boolean obligation; imprecise states defer it to run time."""
        res = self.valid(st, t)
        if res is Validity.VALID:
            return st
        if st.imprecise and self.session.check_sat(list(st.pc) + [t]) != "unsat":
            chk = make_check(site.kind, cond, site.loc, site.anchor, origin=site.origin)
            return self.record(st, chk).assume(t)
        tag = " (solver returned unknown)" if res is Validity.UNKNOWN else ""
        raise VerificationFailure(
            f"{_FAILURE_TEXT.get(site.kind, 'obligation might not hold')}: "
            f"{formula_str(cond)}{tag}", site.loc, unknown=res is Validity.UNKNOWN)

    def missing_acc(self, st: SymbolicState, r: Term, fa: FieldAccess,
                    site: Site) -> tuple[SymbolicState, Term]:
        sort = self.field_sort(fa)
        if self.extender is not None:
            return self.extender.extend(self, st, r, fa, sort, consume=True)
        src = site.src(fa)
        if st.imprecise:
            v = self.fresh(sort, fa.field)
            st = st.assume(mk_not(mk_eq(r, NULL)))
            chk = make_check(site.kind, Acc(src, loc=fa.loc), site.loc, site.anchor,
                             origin=site.origin)
            return self.record(st, chk), v
        raise VerificationFailure(
            f"{_FAILURE_TEXT.get(site.kind, 'insufficient permission')}: "
            f"no permission for acc({expr_str(src)})", site.loc)

    def _consume_pred(self, st: SymbolicState, inst: PredInst, args: list[Term],
                      site: Site) -> list[tuple[SymbolicState, Snapshot]]:
        found = predicate_lookup(self.session, st, inst.name, tuple(args))
        if found is not None:
            return [(remove_chunk(st, *found), found[1].snapshot)]
        src = site.src_formula(inst)
        if self.extender is not None:
            raise ExtensionFailure(
                f"cannot extend the precondition of {self.current_function} with the "
                f"predicate instance {formula_str(src)}", inst.loc)
        if st.imprecise:
            chk = make_check("predicate", src, site.loc, site.anchor, origin=site.origin)
            return [(self.record(st, chk), Leaf(self.fresh(SNAP, inst.name)))]
        raise VerificationFailure(
            f"{_FAILURE_TEXT.get(site.kind, 'obligation might not hold')}: "
            f"no predicate instance {formula_str(src)}", site.loc)

    # -- evaluating formulas as values (function postconditions) ------------

    def eval_formula(self, st: SymbolicState, f: Formula, site: Optional[Site]) -> Branches:
        match f:
            case Pure(expr=e):
                return self.eval(st, e, site)
            case Acc(target=fa):
                out = []
                for s, r in self.eval(st, fa.obj, site):
                    if heap_lookup(self.session, s, r, fa.field) is None:
                        s, _ = self.missing_field(s, r, fa, site)
                    out.append((s, TRUE))
                return out
            case PredInst(name=n, args=args):
                out = []
                for s, ts in self.seq(st, args, site):
                    if predicate_lookup(self.session, s, n, tuple(ts)) is None:
                        raise VerificationFailure(
                            f"no predicate instance {formula_str(f)}", f.loc)
                    out.append((s, TRUE))
                return out
            case Conj(left=l, right=r):
                out = []
                for s, a in self.eval_formula(st, l, site):
                    for s2, b in self.eval_formula(s, r, site):
                        out.append((s2, mk_and(a, b)))
                return out
            case CondF(cond=c, then=t, other=o):
                out = []
                anchor, gexpr = self._branch_anchor(f, c, site)
                for s, ct in self.eval(st, c, site):
                    for s2, positive in self.branch(s, ct, gexpr, anchor):
                        out.extend(self.eval_formula(s2, t if positive else o, site))
                return out
        raise InternalError(f"cannot evaluate formula {f!r}")


def _split(snap: Optional[Snapshot]) -> tuple[Optional[Snapshot], Optional[Snapshot]]:
    if snap is None:
        return None, None
    if isinstance(snap, Unit):
        return Unit(), Unit()
    return split(snap)


def _binop(op: str, a: Term, b: Term) -> Term:
    match op:
        case "+" | "-" | "*":
            return mk_arith(op, a, b)
        case "/":
            return mk_div(a, b)
        case "%":
            return mk_mod(a, b)
        case "<" | "<=" | ">" | ">=":
            return mk_cmp(op, a, b)
        case "==":
            return mk_eq(a, b)
        case "!=":
            return mk_not(mk_eq(a, b))
    raise InternalError(f"unknown operator {op}")
