"""Helpers shared by the test modules."""

from __future__ import annotations

import contextlib
from collections import Counter
from dataclasses import dataclass, replace

from hypothesis import strategies as st

from gvc0 import SolverSession, corpus, load
from gvc0.funcs import eval_funcapp
from gvc0.methods import function_phase
from gvc0.state import FieldChunk
from gvc0.syntax import BOOL, Call, RefType, VarRef
from gvc0.terms import REF, Sym, lit, mk_eq, mk_not, shape

from gvc0.engine import Engine, Site, sort_of
from gvc0.frontend import TypedProgram
from gvc0.syntax import (
    VOID, CondF, Conj, Formula, GradualFormula, MethodDecl, Pure, VarDecl, While, true_formula,
    walk,
)
from gvc0.state import SymbolicState
from gvc0.terms import Pair, Leaf


@dataclass
class SpecFormula:
    label: str
    formula: GradualFormula
    # formula produced first to establish the context (e.g. the precondition)
    context: GradualFormula
    env: dict  # variable name -> source type


def _written(clauses) -> bool:
    return bool(clauses)


def spec_formulas(tp: TypedProgram) -> list[SpecFormula]:
    """Every written specification formula of a program with its context."""
    out = []
    for name, pd in tp.predicates.items():
        out.append(SpecFormula(f"{name}:body", pd.body, true_formula(),
                               {p.name: p.type for p in pd.params}))
    for d in list(tp.functions.values()) + list(tp.methods.values()):
        env = {p.name: p.type for p in d.params}
        if d.requires:
            out.append(SpecFormula(f"{d.name}:pre", d.pre, true_formula(), dict(env)))
        if d.ensures and d.ret != VOID:
            out.append(SpecFormula(f"{d.name}:post", d.post, d.pre,
                                   {**env, "\\result": d.ret}))
        if isinstance(d, MethodDecl):
            local = {n.name: n.type for n in walk(d.body) if isinstance(n, VarDecl)}
            for k, w in enumerate(n for n in walk(d.body) if isinstance(n, While)):
                out.append(SpecFormula(f"{d.name}:loop{k}", w.invariant, d.pre,
                                       {**env, **local}))
    return out


def initial_state(engine: Engine, env: dict) -> SymbolicState:
    return SymbolicState(store={n: engine.fresh(sort_of(t), n.strip("\\")) for n, t in env.items()})


def possible_shapes(f: Formula):
    """Snapshot shapes a formula can produce, one per conditional choice."""
    match f:
        case Pure():
            return {"unit"}
        case Conj(left=l, right=r):
            return {(a, b) for a in possible_shapes(l) for b in possible_shapes(r)}
        case CondF(then=t, other=o):
            return possible_shapes(t) | possible_shapes(o)
    return {"leaf"}


def leaf_terms(s):
    match s:
        case Leaf(term=t):
            return [t]
        case Pair(left=l, right=r):
            return leaf_terms(l) + leaf_terms(r)
    return []


def chunks(heap) -> Counter:
    return Counter(heap)


SITE = Site("assert", (0, ""), (0, 0))


# ---------------------------------------------------------------------------
# Produce/consume round trip

def round_trip_cases() -> list[tuple[str, str]]:
    return [(name, sf.label) for name in corpus.names()
            for sf in spec_formulas(load(corpus.source(name)))
            if not sf.formula.imprecise and not name.startswith("reject")]


def round_trip(name: str, label: str) -> None:
    """Consume right after produce: no checks, same heap, matching snapshot."""
    tp = load(corpus.source(name))
    sf = next(s for s in spec_formulas(tp) if s.label == label)
    with SolverSession() as s:
        eng = Engine(tp, s)
        function_phase(eng)
        eng.collected = []
        for ctx in eng.produce_g(initial_state(eng, sf.env), sf.context, None, SITE):
            # keep what the context proves, not the permissions it grants
            ctx = replace(ctx, heap=(), opt_heap=())
            for st_ in eng.produce_g(ctx, sf.formula, None, SITE):
                results = eng.consume_g(st_, sf.formula, SITE)
                assert results
                for after, snap in results:
                    assert after.checks == ctx.checks
                    assert chunks(after.heap) == chunks(ctx.heap)
                    assert shape(snap) in possible_shapes(sf.formula.body)
                    produced = [c.value if isinstance(c, FieldChunk) else c.snapshot.term
                                for c in (Counter(st_.heap) - Counter(ctx.heap)).elements()]
                    assert Counter(leaf_terms(snap)) == Counter(produced)
        assert eng.collected == []


# ---------------------------------------------------------------------------
# Generated call sites of `double`

REFS = [Sym(REF, f"r{i}") for i in range(4)]


@contextlib.contextmanager
def double_engine_for():
    tp = load(corpus.source("double"))
    with SolverSession() as s:
        eng = Engine(tp, s)
        function_phase(eng)
        yield eng


@st.composite
def call_sites(draw):
    present = draw(st.lists(st.sampled_from(range(4)), unique=True))
    rest = [i for i in range(4) if i not in present]
    optimistic = draw(st.lists(st.sampled_from(rest), unique=True)) if rest else []
    heap = tuple(FieldChunk(REFS[i], "val", Sym("Int", f"v{i}")) for i in present)
    opt = tuple(FieldChunk(REFS[i], "val", Sym("Int", f"w{i}")) for i in optimistic)
    b, x, y = draw(st.tuples(st.booleans(), st.sampled_from(range(4)), st.sampled_from(range(4))))
    # a feasible call: the conditional precondition must be satisfiable
    args = (b, x, y, x if b else y)
    distinct = [mk_not(mk_eq(REFS[i], REFS[j])) for i in range(4) for j in range(i)]
    return heap, opt, args, distinct


def assert_heaps_preserved(engine, site) -> int:
    """Apply `double` at a generated site; returns the number of result branches."""
    heap, opt, (b, x, y, z), distinct = site
    store = {"b": Sym("Bool", "bb"), "x": REFS[x], "y": REFS[y], "z": REFS[z]}
    st_ = SymbolicState(imprecise=True, heap=heap, opt_heap=opt, store=store,
                        pc=tuple(distinct) + (mk_eq(store["b"], lit(b)),))
    expr = Call("double", [VarRef("b", ty=BOOL)] +
                [VarRef(v, ty=RefType("Node")) for v in "xyz"], ty=None)
    expr.nid = 10_000
    results = eval_funcapp(engine, st_, expr, None)
    for s2, _ in results:
        assert chunks(s2.heap) == chunks(heap)
        assert chunks(s2.opt_heap) == chunks(opt)
    return len(results)
