"""Pure functions: well-definedness, snapshot extension, admissibility of
preconditions, axiomatisation and symbolic application."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import networkx as nx

from .errors import ExtensionFailure, InternalError, VerificationFailure
from .engine import Engine, Site, sort_of
from .frontend import TypedProgram
from .printer import expr_str, formula_str
from .smt import Axiom, SolverSession, function_symbol, quantified
from .state import CheckOrigin, FieldChunk, RuntimeCheck, SymbolicState
from .syntax import (
    BOOL, INT, Acc, Binary, BoolLit, Call, CondF, Conj, Expr, FieldAccess, Formula,
    FunctionDecl, GradualFormula, IntLit, NullLit, PredInst, Pure, RefType, Ternary, Unary,
    Unfolding, VarRef, walk,
)
from .terms import (
    NULL, SNAP, TRUE, App, FApp, Leaf, Lit, Sym, Term, mk_and, mk_eq, mk_implies, mk_ite,
    mk_not, mk_or, snap_term, substitute, symbols,
)

MAX_PASSES = 8


@dataclass(frozen=True)
class SnapshotEntry:
    location: str
    path: tuple[str, ...]
    origin: str  # "declared" | "extended"
    guard: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExtensionEvent:
    function: str
    access: str
    guard: str
    path: tuple[str, ...]


@dataclass
class FunctionInfo:
    decl: FunctionDecl
    snapshot_map: list[SnapshotEntry] = field(default_factory=list)
    extended_pre: Optional[GradualFormula] = None
    axioms: list[Axiom] = field(default_factory=list)
    extensions: list[ExtensionEvent] = field(default_factory=list)
    checks: list[RuntimeCheck] = field(default_factory=list)
    rejected: Optional[str] = None
    failure: Optional[VerificationFailure] = None
    # raw material for the axioms, kept for inspection
    guard: Term = TRUE
    body_paths: list[tuple[Term, Term]] = field(default_factory=list)
    post_paths: list[tuple[Term, Term]] = field(default_factory=list)
    snapshot: Optional[Sym] = None
    params: list[Sym] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def verdict(self) -> str:
        if self.rejected:
            return "rejected"
        if self.failure is not None:
            return "static-failure"
        return "verified-with-checks" if self.checks else "verified"

    @property
    def usable(self) -> bool:
        return self.rejected is None and self.failure is None


# ---------------------------------------------------------------------------
# Admissibility of preconditions

def _mentions(node) -> tuple[list[str], list[str]]:
    preds, funcs = [], []
    for n in walk(node):
        if isinstance(n, (PredInst, Unfolding)):
            name = n.name if isinstance(n, PredInst) else n.pred
            preds.append(name)
        elif isinstance(n, Call):
            funcs.append(n.name)
    return preds, funcs


def dependency_graph(tp: TypedProgram) -> nx.DiGraph:
    """Predicate bodies and function preconditions, inlined equi-recursively."""
    g = nx.DiGraph()
    for name, pd in tp.predicates.items():
        g.add_node(("pred", name))
        preds, funcs = _mentions(pd.body)
        g.add_edges_from((("pred", name), ("pred", p)) for p in preds)
        g.add_edges_from((("pred", name), ("func", f)) for f in funcs if f in tp.functions)
    for name, fd in tp.functions.items():
        g.add_node(("func", name))
        for r in fd.requires:
            preds, funcs = _mentions(r)
            g.add_edges_from((("func", name), ("pred", p)) for p in preds)
            g.add_edges_from((("func", name), ("func", f)) for f in funcs if f in tp.functions)
    return g


def recursive_predicates(tp: TypedProgram) -> set[str]:
    g = dependency_graph(tp)
    out = set()
    for comp in nx.strongly_connected_components(g):
        for kind, name in comp:
            if kind == "pred" and (len(comp) > 1 or g.has_edge((kind, name), (kind, name))):
                out.add(name)
    return out


def reject_inadmissible_pre(f: FunctionDecl, tp: TypedProgram) -> Optional[str]:
    """Diagnostic when the precondition may not be used for axiomatisation."""
    g = dependency_graph(tp)
    roots = []
    for r in f.requires:
        preds, funcs = _mentions(r)
        roots += [("pred", p) for p in preds] + [("func", h) for h in funcs if h in tp.functions]
    reach: list[tuple[str, str]] = []
    for r in roots:
        for n in [r] + sorted(nx.descendants(g, r)):
            if n not in reach:
                reach.append(n)
    rec = recursive_predicates(tp)
    if ("func", f.name) in reach:
        return f"precondition of {f.name} transitively contains an application of {f.name}"
    for kind, name in reach:
        if kind != "pred" or name not in rec:
            continue
        if f.pre.imprecise:
            return (f"imprecise precondition of {f.name} reaches the recursive predicate "
                    f"{name} (equi-recursive check)")
        if tp.predicates[name].body.imprecise:
            return (f"precondition of {f.name} reaches the recursive predicate {name}, "
                    f"whose body is imprecise (equi-recursive check)")
    return None


# ---------------------------------------------------------------------------
# Function ordering

def function_components(tp: TypedProgram) -> list[list[str]]:
    """Strongly connected components of the call graph, callees first; members
    keep source order."""
    order = {name: i for i, name in enumerate(tp.functions)}
    g = nx.DiGraph()
    g.add_nodes_from(tp.functions)
    for name, fd in tp.functions.items():
        todo, seen = [fd], set()
        while todo:
            node = todo.pop()
            for n in walk(node):
                if isinstance(n, Call) and n.name in tp.functions:
                    g.add_edge(name, n.name)
                elif isinstance(n, (PredInst, Unfolding)):
                    p = n.name if isinstance(n, PredInst) else n.pred
                    if p not in seen and p in tp.predicates:
                        seen.add(p)
                        todo.append(tp.predicates[p])
    cond = nx.condensation(g)
    comps = []
    for c in reversed(list(nx.lexicographical_topological_sort(
            cond, key=lambda c: min(order[m] for m in cond.nodes[c]["members"])))):
        comps.append(sorted(cond.nodes[c]["members"], key=order.__getitem__))
    return comps


# ---------------------------------------------------------------------------
# Snapshot extension

@dataclass
class _Ext:
    access: FieldAccess
    guard: Optional[Expr]
    value: Term

    @property
    def key(self) -> tuple[str, str]:
        return expr_str(self.access), self.guard_text

    @property
    def guard_text(self) -> str:
        return "true" if self.guard is None else expr_str(self.guard)

    def clause(self) -> Formula:
        acc = Acc(self.access, loc=self.access.loc)
        if self.guard is None:
            return acc
        return CondF(self.guard, acc, Pure(BoolLit(True, ty=BOOL)), loc=self.access.loc)


def _to_source(t: Term, src: dict[Term, Expr]) -> Optional[Expr]:
    """Express a term over the function parameters, if possible."""
    if t in src:
        return src[t]
    match t:
        case Lit(value=v) if isinstance(v, bool):
            return BoolLit(v, ty=BOOL)
        case Lit(value=v):
            return IntLit(v, ty=INT) if v >= 0 else Unary("-", IntLit(-v, ty=INT), ty=INT)
        case Sym() if t == NULL:
            return NullLit()
        case App(op="not", args=(a,)):
            inner = _to_source(a, src)
            return None if inner is None else Unary("!", inner, ty=BOOL)
        case App(op="-", args=(a,)):
            inner = _to_source(a, src)
            return None if inner is None else Unary("-", inner, ty=INT)
        case App(op=op, args=args) if op in ("and", "or", "=", "+", "-", "*", "<", "<=", ">", ">="):
            parts = [_to_source(a, src) for a in args]
            if any(p is None for p in parts):
                return None
            sop = {"and": "&&", "or": "||", "=": "=="}.get(op, op)
            ty = INT if op in ("+", "-", "*") else BOOL
            out = parts[0]
            for p in parts[1:]:
                out = Binary(sop, out, p, ty=ty)
            return out
        case App(op="ite", args=(c, a, b)):
            parts = [_to_source(x, src) for x in (c, a, b)]
            if any(p is None for p in parts):
                return None
            return Ternary(*parts, ty=parts[1].ty)
        case FApp(name=n, args=args):
            parts = [_to_source(x, src) for x in args[1:]]
            if any(p is None for p in parts):
                return None
            return Call(n, parts)
    return None


class Extender:
    """Resolves heap misses during well-definedness checking."""

    def __init__(self, info: FunctionInfo, known: list[_Ext]):
        self.info = info
        self.known = known
        self.new: list[_Ext] = []
        self.src: dict[Term, Expr] = {}

    def learn(self, tp: TypedProgram, params: dict[str, Sym], states: list[SymbolicState]) -> None:
        decl = self.info.decl
        for p in decl.params:
            self.src[params[p.name]] = VarRef(p.name, ty=p.type)
        for st in states:
            for c in st.heap:
                if not isinstance(c, FieldChunk) or c.value in self.src:
                    continue
                recv = _to_source(c.receiver, self.src)
                if recv is None or not isinstance(recv.ty, RefType):
                    continue
                self.src[c.value] = FieldAccess(recv, c.field,
                                                ty=tp.field_type(recv.ty.struct, c.field))

    def extend(self, engine: Engine, st: SymbolicState, r: Term, fa: FieldAccess, sort: str,
               consume: bool = False) -> tuple[SymbolicState, Term]:
        decl = self.info.decl
        if not decl.pre.imprecise:
            raise VerificationFailure(
                f"insufficient permission to access {expr_str(fa)} in {decl.name}", fa.loc)
        recv = _to_source(r, self.src)
        if recv is None:
            raise ExtensionFailure(
                f"cannot extend the precondition of {decl.name} with acc({expr_str(fa)}): "
                f"the receiver is not expressible over the parameters", fa.loc)
        guards: list[Expr] = []
        for g in st.branches:
            ge = _to_source(g.term, self.src)
            if ge is None:
                raise ExtensionFailure(
                    f"cannot extend the precondition of {decl.name} with acc({expr_str(fa)}): "
                    f"the branch condition {g.text} is not expressible over the parameters",
                    fa.loc)
            if isinstance(ge, BoolLit) and ge.value:
                continue
            if all(expr_str(ge) != expr_str(x) for x in guards):
                guards.append(ge)
        guard = None
        for ge in guards:
            guard = ge if guard is None else Binary("&&", guard, ge, ty=BOOL)
        access = FieldAccess(recv, fa.field, ty=fa.ty, loc=fa.loc)
        entry = _Ext(access, guard, engine.fresh(sort, fa.field))
        for e in self.known + self.new:
            if e.key == entry.key:
                entry = e
                break
        else:
            self.new.append(entry)
        if not consume:
            chunk = FieldChunk(r, fa.field, entry.value)
            st = replace(st, opt_heap=st.opt_heap + (chunk,)).assume(mk_not(mk_eq(r, NULL)))
        return st, entry.value


def extended_precondition(decl: FunctionDecl, exts: list[_Ext]) -> GradualFormula:
    pre = decl.pre
    if not pre.imprecise:
        return pre
    chain: Formula = Pure(BoolLit(True, ty=BOOL))
    for e in reversed(exts):
        chain = Conj(e.clause(), chain, loc=e.access.loc)
    return GradualFormula(True, Conj(pre.body, chain, loc=pre.loc), loc=pre.loc)


def _declared_entries(f: Formula, path: tuple[str, ...], guard: tuple[str, ...],
                      out: list[SnapshotEntry]) -> None:
    match f:
        case Acc(target=t):
            out.append(SnapshotEntry(expr_str(t), path, "declared", guard))
        case PredInst():
            out.append(SnapshotEntry(formula_str(f), path, "declared", guard))
        case Conj(left=l, right=r):
            _declared_entries(l, path + ("left",), guard, out)
            _declared_entries(r, path + ("right",), guard, out)
        case CondF(cond=c, then=t, other=o):
            _declared_entries(t, path, guard + (expr_str(c),), out)
            _declared_entries(o, path, guard + ("!(" + expr_str(c) + ")",), out)


def snapshot_map(decl: FunctionDecl, exts: list[_Ext]) -> list[SnapshotEntry]:
    out: list[SnapshotEntry] = []
    pre = decl.pre
    _declared_entries(pre.body, ("left",) if pre.imprecise else (), (), out)
    for k, e in enumerate(exts):
        path = ("right",) * (k + 1) + ("left",)
        guard = () if e.guard is None else (expr_str(e.guard),)
        out.append(SnapshotEntry(expr_str(e.access), path, "extended", guard))
    return out


# ---------------------------------------------------------------------------
# Well-definedness

def well_formed(engine: Engine, st: SymbolicState, g: GradualFormula, snap,
                site: Site) -> list[SymbolicState]:
    """Produce twice; the second pass starts from the first pass's path condition."""
    out = []
    for s2 in engine.produce_g(st, g, snap, site):
        out.extend(engine.produce_g(replace(st, pc=s2.pc), g, snap, site))
    return out


def well_formed_e(engine: Engine, st: SymbolicState, g: GradualFormula,
                  site: Optional[Site] = None) -> list[tuple[SymbolicState, Term]]:
    """Evaluate a postcondition as an expression; `?` makes the state imprecise."""
    return engine.eval_formula(replace(st, imprecise=g.imprecise), g.body, site)


def _conds(pc, common) -> Term:
    return mk_and(*(t for t in pc if t not in common))


def _run_pass(engine: Engine, info: FunctionInfo, ext: Extender) -> None:
    f = info.decl
    ret = sort_of(f.ret)
    params = {p.name: engine.fresh(sort_of(p.type), p.name) for p in f.params}
    s = engine.fresh(SNAP, "s")
    st0 = SymbolicState(store=dict(params))
    pre = extended_precondition(f, ext.known)
    entry = Site("pre", (f.nid, "entry"), f.loc)
    exit_site = Site("post", (f.nid, "exit"), f.loc)
    sigma1 = well_formed(engine, st0, pre, Leaf(s), entry)
    ext.learn(engine.tp, params, sigma1)
    args = tuple(params[p.name] for p in f.params)
    limited = FApp(ret, f.name, (s,) + args, True)

    body_paths, post_paths = [], []
    common = set(sigma1[0].pc) if sigma1 else set()
    for st in sigma1[1:]:
        common &= set(st.pc)
    for s1 in sigma1:
        # postcondition well-formedness; \result is the limited application so
        # that the same evaluation yields the postcondition axiom
        for sp, w in well_formed_e(engine, s1.bind("\\result", limited), f.post):
            post_paths.append((_conds(sp.pc, common), w))
        for s2, v in engine.eval(s1, f.body):
            engine.consume_g(s2.bind("\\result", v), f.post, exit_site)
            body_paths.append((_conds(s2.pc, common), v))
    info.guard = mk_or(*(mk_and(*s1.pc) for s1 in sigma1)) if sigma1 else TRUE
    info.body_paths = body_paths
    info.post_paths = post_paths
    info.snapshot = s
    info.params = list(args)


def axiomatise(info: FunctionInfo) -> list[Axiom]:
    f = info.decl
    ret = sort_of(f.ret)
    s = info.snapshot
    bound_s = Sym(SNAP, "$s")
    bound = [Sym(p.sort, f"{prm.name}$") for p, prm in zip(info.params, f.params)]
    ren: dict[Term, Term] = {s: bound_s, **dict(zip(info.params, bound))}
    app = FApp(ret, f.name, (bound_s, *bound))
    lim = FApp(ret, f.name, (bound_s, *bound), True)
    allowed = {bound_s, *bound}

    def close(t: Term, what: str) -> Term:
        t = substitute(t, ren)
        free = symbols(t) - allowed
        if free:
            names = ", ".join(sorted(x.name for x in free))
            raise VerificationFailure(
                f"{what} axiom of {f.name} depends on values outside its snapshot: {names}",
                f.loc)
        return t

    body = None
    for c, v in reversed(info.body_paths):
        body = v if body is None else mk_ite(c, v, body)
    if body is None:
        raise InternalError(f"no feasible body path for {f.name}")
    guard = close(info.guard, "definitional")
    body = close(body, "definitional")
    post = mk_and(*(mk_implies(c, w) for c, w in info.post_paths))
    post = close(post, "postcondition")
    qname = function_symbol(f.name)
    a1 = quantified(f"{qname}%A1", [bound_s, *bound], app, App("Bool", "=", (app, lim)))
    eq = App("Bool", "=", (app, body))
    a2 = quantified(f"{qname}%A2", [bound_s, *bound], app,
                    eq if guard == TRUE else App("Bool", "=>", (guard, eq)))
    a3 = quantified(f"{qname}%A3", [bound_s, *bound], lim,
                    App("Bool", "=>", (guard, post)))
    return [a1, a2, a3]


def verify_function(engine: Engine, f: FunctionDecl, scc: Optional[set[str]] = None) -> FunctionInfo:
    info = FunctionInfo(f)
    info.rejected = reject_inadmissible_pre(f, engine.tp)
    if info.rejected:
        return info
    known: list[_Ext] = []
    engine.current_function = f.name
    engine.scc = scc or {f.name}
    try:
        for _ in range(MAX_PASSES):
            ext = Extender(info, known)
            engine.extender = ext
            engine.collected = []
            failure = None
            try:
                _run_pass(engine, info, ext)
            except VerificationFailure as exc:
                failure = exc
            if ext.new:
                # grow the precondition and start over
                known = known + ext.new
                continue
            info.failure = failure
            break
        else:
            raise InternalError(f"snapshot extension for {f.name} did not stabilise")
    finally:
        engine.extender = None
        engine.current_function = None
        engine.scc = set()
    info.extended_pre = extended_precondition(f, known)
    info.snapshot_map = snapshot_map(f, known)
    info.extensions = [
        ExtensionEvent(f.name, expr_str(e.access), e.guard_text, sm.path)
        for e, sm in zip(known, [m for m in info.snapshot_map if m.origin == "extended"])]
    info.checks = _dedupe(engine.collected)
    engine.collected = []
    if info.failure is None:
        try:
            info.axioms = axiomatise(info)
        except VerificationFailure as exc:
            info.failure = exc
    return info


def _dedupe(checks: list[RuntimeCheck]) -> list[RuntimeCheck]:
    return list(dict.fromkeys(checks))


def register(engine: Engine, info: FunctionInfo) -> None:
    """Publish a verified function: assert its axioms."""
    engine.functions[info.name] = info
    if not info.usable:
        engine.unusable[info.name] = info.rejected or str(info.failure)
        return
    for ax in info.axioms:
        engine.session.assert_axiom(ax)


def declare_function_symbols(session: SolverSession, info: FunctionInfo,
                             declare: bool = True) -> None:
    f = info.decl
    if declare:
        session.declare_function(f.name, [sort_of(p.type) for p in f.params], sort_of(f.ret))
    for ax in info.axioms:
        session.assert_axiom(ax)


def declaration_text(f: FunctionDecl) -> str:
    sig = " ".join(["Snap"] + [sort_of(p.type) for p in f.params])
    ret = sort_of(f.ret)
    return (f"(declare-fun {function_symbol(f.name)} ({sig}) {ret})\n"
            f"(declare-fun {function_symbol(f.name, True)} ({sig}) {ret})")


# ---------------------------------------------------------------------------
# Application

def eval_funcapp(engine: Engine, st: SymbolicState, call: Call, site: Optional[Site]):
    name = call.name
    decl = engine.tp.functions[name]
    if name in engine.unusable:
        raise VerificationFailure(
            f"call to {name}, which did not pass verification", call.loc)
    info = engine.functions.get(name)
    if info is not None and info.extended_pre is not None:
        pre = info.extended_pre
    elif name in engine.scc:
        # same component: the snapshot shape must match what outside callers build
        own = engine.extender is not None and name == engine.current_function
        pre = extended_precondition(decl, engine.extender.known if own else [])
    else:
        raise InternalError(f"function {name} used before it was verified")
    limited = name in engine.scc
    ret = sort_of(decl.ret)
    out = []
    for s2, args in engine.seq(st, call.args, site):
        actual = [site.src(a) if site else a for a in call.args]
        origin = CheckOrigin(name, call.loc,
                             tuple((p.name, expr_str(a)) for p, a in zip(decl.params, actual)))
        csite = Site("pre", site.anchor if site else (call.nid, ""),
                     site.loc if site else call.loc,
                     {p.name: a for p, a in zip(decl.params, actual)}, origin)
        callee = replace(s2, store={p.name: t for p, t in zip(decl.params, args)}, origin=origin)
        for s3, snap in engine.consume_g(callee, pre, csite):
            s4 = replace(s3, heap=s2.heap, opt_heap=s2.opt_heap, store=s2.store,
                         imprecise=True if decl.post.imprecise else s2.imprecise,
                         origin=s2.origin)
            app = FApp(ret, name, (snap_term(snap), *args), limited)
            if limited:
                s4 = s4.assume(*_inductive_post(engine, replace(callee, heap=s2.heap,
                                                                opt_heap=s2.opt_heap), decl, app))
            out.append((s4, app))
    return out


def _inductive_post(engine: Engine, st: SymbolicState, decl: FunctionDecl,
                    app: Term) -> list[Term]:
    """Postcondition of a call inside the function's own component, assumed as
    the induction hypothesis.  Only unconditional facts are kept."""
    saved = engine.extender, engine.collected
    engine.extender, engine.collected = None, []
    try:
        paths = engine.eval_formula(replace(st.bind("\\result", app), imprecise=False,
                                            branches=()), decl.post.body, None)
    except VerificationFailure:
        return []
    finally:
        engine.extender, engine.collected = saved
    return [paths[0][1]] if len(paths) == 1 else []

