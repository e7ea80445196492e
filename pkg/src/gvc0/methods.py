"""Method verification (exec) and whole-program driver."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from .engine import Engine, Site, sort_of
from .errors import InternalError, VerificationFailure
from .frontend import TypedProgram
from .funcs import (
    ExtensionEvent, FunctionInfo, declaration_text, function_components, register,
    verify_function,
)
from .smt import PREAMBLE, SolverSession
from .state import CheckOrigin, FieldChunk, RuntimeCheck, SymbolicState, heap_lookup, remove_chunk
from .syntax import (
    Assert, Assign, Block, CallStmt, FieldWrite, Fold, FunctionDecl, If, Loc, MethodDecl, PredicateDecl,
    PredInst,
    Return, Stmt, Unfold, VarDecl, VarRef, While, walk,
)
from .terms import FreshSymbols
from .printer import expr_str

log = logging.getLogger(__name__)

VERDICT_ORDER = ["verified", "verified-with-checks", "static-failure", "rejected"]


@dataclass
class DeclReport:
    name: str
    kind: str  # "predicate" | "function" | "method"
    verdict: str
    loc: Loc = (0, 0)
    checks: list[RuntimeCheck] = field(default_factory=list)
    extensions: list[ExtensionEvent] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class VerificationReport:
    file: str
    declarations: list[DeclReport] = field(default_factory=list)
    functions: dict[str, FunctionInfo] = field(default_factory=dict)
    axiom_text: str = ""

    @property
    def verdict(self) -> str:
        worst = "verified"
        for d in self.declarations:
            if VERDICT_ORDER.index(d.verdict) > VERDICT_ORDER.index(worst):
                worst = d.verdict
        return worst

    def entry(self, name: str) -> DeclReport:
        for d in self.declarations:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def all_checks(self) -> list[RuntimeCheck]:
        return [c for d in self.declarations for c in d.checks]


def _verdict(checks, failure) -> str:
    if failure is not None:
        return "static-failure"
    return "verified-with-checks" if checks else "verified"


def _diag(exc: Exception) -> str:
    return str(exc)


# ---------------------------------------------------------------------------
# exec

def _assigned(b: Block) -> list[str]:
    out = []
    for n in walk(b):
        name = None
        if isinstance(n, Assign):
            name = n.target
        elif isinstance(n, CallStmt) and n.target is not None:
            name = n.target
        if name is not None and name not in out:
            out.append(name)
    return out


def _declared(b: Block) -> set[str]:
    return {n.name for n in walk(b) if isinstance(n, VarDecl)}


class MethodVerifier:
    def __init__(self, engine: Engine, m: MethodDecl):
        self.engine = engine
        self.m = m

    def exec_block(self, states: list[SymbolicState], b: Block) -> list[SymbolicState]:
        for s in b.stmts:
            nxt = []
            for st in states:
                nxt.extend([st] if st.returned else self.exec(st, s))
            states = nxt
        return states

    def exec(self, st: SymbolicState, s: Stmt) -> list[SymbolicState]:
        eng = self.engine
        here = Site("assert", (s.nid, ""), s.loc)
        match s:
            case Block():
                return self.exec_block([st], s)
            case VarDecl(type=t, name=n, init=None):
                return [st.bind(n, eng.fresh(sort_of(t), n))]
            case VarDecl(name=n, init=e) | Assign(target=n, value=e):
                return [s2.bind(n, v) for s2, v in eng.eval(st, e)]
            case FieldWrite(target=fa, value=e):
                out = []
                for s1, r in eng.eval(st, fa.obj):
                    for s2, v in eng.eval(s1, e):
                        found = heap_lookup(eng.session, s2, r, fa.field)
                        if found is None:
                            s2, _ = eng.missing_field(s2, r, fa, None)
                            found = heap_lookup(eng.session, s2, r, fa.field)
                            if found is None:
                                raise InternalError("optimistic chunk vanished")
                        which, old = found
                        s3 = remove_chunk(s2, which, old)
                        chunk = FieldChunk(old.receiver, fa.field, v)
                        if which == "h":
                            s3 = replace(s3, heap=s3.heap + (chunk,))
                        else:
                            s3 = replace(s3, opt_heap=s3.opt_heap + (chunk,))
                        out.append(s3)
                return out
            case CallStmt():
                return self.exec_call(st, s)
            case If(cond=c, then=t, other=o):
                out = []
                for s1, ct in eng.eval(st, c):
                    for s2, positive in eng.branch(s1, ct, c, (s.nid, "branch")):
                        if positive:
                            out.extend(self.exec_block([s2], t))
                        elif o is not None:
                            out.extend(self.exec_block([s2], o))
                        else:
                            out.append(s2)
                return out
            case While():
                return self.exec_while(st, s)
            case Assert(formula=g):
                out = []
                for s1, _ in eng.consume_g(st, g, here):
                    out.append(replace(s1, heap=st.heap, opt_heap=st.opt_heap))
                return out
            case Fold(pred=p, args=args):
                site = Site("predicate", (s.nid, ""), s.loc)
                pd = eng.tp.predicates[p]
                out = []
                for s1, ts in eng.seq(st, args, None):
                    inner = Site("predicate", (s.nid, ""), s.loc,
                                 {prm.name: a for prm, a in zip(pd.params, args)})
                    callee = replace(s1, store={prm.name: t for prm, t in zip(pd.params, ts)})
                    for s2, snap in eng.consume_g(callee, pd.body, inner):
                        s2 = replace(s2, store=s1.store)
                        out.extend(eng.produce(s2, PredInst(p, args, loc=s.loc), snap, site))
                return out
            case Unfold(pred=p, args=args):
                site = Site("predicate", (s.nid, ""), s.loc)
                out = []
                for s1, snaps in eng.consume(st, PredInst(p, args, loc=s.loc), site):
                    ts = None
                    for s2, ts in eng.seq(s1, args, None):
                        out.extend(eng.produce_predicate_body(s2, p, args, ts, snaps, site))
                return out
            case Return(value=None):
                return [replace(st, returned=True)]
            case Return(value=e):
                return [replace(s2.bind("\\result", v), returned=True) for s2, v in eng.eval(st, e)]
        raise InternalError(f"cannot execute {s!r}")

    def exec_call(self, st: SymbolicState, s: CallStmt) -> list[SymbolicState]:
        eng = self.engine
        callee = eng.tp.methods[s.name]
        out = []
        for s1, ts in eng.seq(st, s.args, None):
            bindings = {p.name: a for p, a in zip(callee.params, s.args)}
            origin = CheckOrigin(s.name, s.loc,
                                 tuple((k, expr_str(v)) for k, v in bindings.items()))
            pre_site = Site("pre", (s.nid, ""), s.loc, bindings, origin)
            cstore = {p.name: t for p, t in zip(callee.params, ts)}
            for s2, _ in eng.consume_g(replace(s1, store=cstore, origin=origin),
                                       callee.pre, pre_site):
                if callee.pre.imprecise:
                    # an imprecise precondition may take the whole frame
                    s2 = replace(s2, heap=(), opt_heap=(), imprecise=True)
                post_store = dict(cstore)
                post_bind = dict(bindings)
                if callee.ret is not None and sort_of_or_none(callee.ret):
                    res = eng.fresh(sort_of(callee.ret), "result")
                    post_store["\\result"] = res
                    if s.target is not None:
                        post_bind["\\result"] = VarRef(s.target, loc=s.loc)
                post_site = Site("post", (s.nid, "post"), s.loc, post_bind)
                s3 = replace(s2, store=post_store, origin=s1.origin)
                for s4 in eng.produce_g(s3, callee.post, None, post_site):
                    s4 = replace(s4, store=s1.store)
                    if s.target is not None:
                        s4 = s4.bind(s.target, post_store["\\result"])
                    out.append(s4)
        return out

    def exec_while(self, st: SymbolicState, w: While) -> list[SymbolicState]:
        eng = self.engine
        inv = w.invariant
        out: list[SymbolicState] = []
        entry = Site("invariant", (w.nid, "entry"), w.loc)
        for s1, _ in eng.consume_g(st, inv, entry):
            frame = s1
            if inv.imprecise:
                frame = replace(s1, heap=(), opt_heap=())
            havoc = dict(st.store)
            local = _declared(w.body)
            for x in _assigned(w.body):
                if x in havoc and x not in local:
                    havoc[x] = eng.fresh(havoc[x].sort, x)
            # an arbitrary iteration
            body_st = replace(frame, heap=(), opt_heap=(), store=havoc, imprecise=False)
            iter_site = Site("invariant", (w.nid, "iter"), w.loc)
            for b0 in eng.produce_g(body_st, inv, None, Site("invariant", (w.nid, "body"), w.loc)):
                for b1, ct in eng.eval(b0, w.cond):
                    for b2, positive in eng.branch(b1, ct, w.cond, (w.nid, "branch")):
                        if not positive:
                            continue
                        for b3 in self.exec_block([b2], w.body):
                            if b3.returned:
                                out.append(b3)
                                continue
                            eng.consume_g(b3, inv, iter_site)
            # leaving the loop
            exit_st = replace(frame, store=havoc)
            for e0 in eng.produce_g(exit_st, inv, None, Site("invariant", (w.nid, "exit"), w.loc)):
                for e1, ct in eng.eval(e0, w.cond):
                    for e2, positive in eng.branch(e1, ct, w.cond, (w.nid, "branch")):
                        if not positive:
                            out.append(e2)
        return out


def sort_of_or_none(t) -> Optional[str]:
    try:
        return sort_of(t)
    except InternalError:
        return None


def verify_method(engine: Engine, m: MethodDecl) -> DeclReport:
    engine.collected = []
    mv = MethodVerifier(engine, m)
    failure = None
    try:
        st0 = SymbolicState(store={p.name: engine.fresh(sort_of(p.type), p.name) for p in m.params})
        params = dict(st0.store)
        exit_site = Site("post", (m.nid, "exit"), m.loc)
        for s1 in engine.produce_g(st0, m.pre, None, Site("pre", (m.nid, "entry"), m.loc)):
            for s2 in mv.exec_block([s1], m.body):
                store = {**params}
                if "\\result" in s2.store:
                    store["\\result"] = s2.store["\\result"]
                engine.consume_g(replace(s2, store=store), m.post, exit_site)
    except VerificationFailure as exc:
        failure = exc
    checks = list(dict.fromkeys(engine.collected))
    engine.collected = []
    return DeclReport(m.name, "method", _verdict(checks, failure), m.loc, checks, [],
                      [_diag(failure)] if failure else [])


def verify_predicate(engine: Engine, p: PredicateDecl) -> DeclReport:
    """Well-formedness: the body can be produced from nothing."""
    engine.collected = []
    failure = None
    try:
        st0 = SymbolicState(store={prm.name: engine.fresh(sort_of(prm.type), prm.name)
                                   for prm in p.params})
        engine.produce_g(st0, p.body, None, Site("predicate", (p.nid, ""), p.loc))
    except VerificationFailure as exc:
        failure = exc
    checks = list(dict.fromkeys(engine.collected))
    engine.collected = []
    return DeclReport(p.name, "predicate", _verdict(checks, failure), p.loc, checks, [],
                      [_diag(failure)] if failure else [])


def _function_report(info: FunctionInfo) -> DeclReport:
    diags = []
    if info.rejected:
        diags.append(f"{info.decl.loc[0]}:{info.decl.loc[1]}: {info.rejected}")
    if info.failure is not None:
        diags.append(_diag(info.failure))
    return DeclReport(info.name, "function", info.verdict, info.decl.loc, info.checks,
                      info.extensions, diags)


def function_phase(engine: Engine) -> dict[str, FunctionInfo]:
    """Declare every function symbol, then verify and publish functions
    callee-first.  Afterwards `engine` can evaluate any usable function."""
    tp, session = engine.tp, engine.session
    for f in tp.functions.values():
        session.declare_function(f.name, [sort_of(p.type) for p in f.params], sort_of(f.ret))
    infos: dict[str, FunctionInfo] = {}
    for comp in function_components(tp):
        for name in comp:
            infos[name] = verify_function(engine, tp.functions[name], set(comp))
            register(engine, infos[name])
    return infos


def axiom_text(tp: TypedProgram, infos: dict[str, FunctionInfo]) -> str:
    parts = [PREAMBLE]
    for name, f in tp.functions.items():
        info = infos[name]
        parts.append(f"; function {name}: {info.verdict}")
        parts.append(declaration_text(f))
        parts += [f"(assert {ax.text})" for ax in info.axioms]
    return "\n".join(parts) + "\n"


def verify_program(tp: TypedProgram, session: SolverSession, file: str = "<input>",
                   fresh: Optional[FreshSymbols] = None, jobs: int = 1) -> VerificationReport:
    """Predicates, then functions callee-first, then methods.  With `jobs` > 1
    methods are verified concurrently; the report keeps declaration order."""
    engine = Engine(tp, session, fresh)
    report = VerificationReport(file)
    by_name: dict[str, DeclReport] = {}

    for p in tp.predicates.values():
        by_name[p.name] = verify_predicate(engine, p)

    infos = function_phase(engine)
    for name, info in infos.items():
        by_name[name] = _function_report(info)
    report.functions = infos
    report.axiom_text = axiom_text(tp, infos)

    methods = list(tp.methods.values())
    if jobs > 1 and len(methods) > 1:
        # axioms are fixed from here on; each worker gets its own solver
        def work(m: MethodDecl) -> DeclReport:
            with session.fork() as sub:
                eng = Engine(tp, sub, FreshSymbols())
                eng.functions, eng.unusable = engine.functions, engine.unusable
                return verify_method(eng, m)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for m, entry in zip(methods, pool.map(work, methods)):
                by_name[m.name] = entry
    else:
        for m in methods:
            by_name[m.name] = verify_method(engine, m)

    for d in tp.program.decls:
        if isinstance(d, (PredicateDecl, FunctionDecl, MethodDecl)):
            report.declarations.append(by_name[d.name])
    return report
