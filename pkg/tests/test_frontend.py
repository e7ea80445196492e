import pytest
from hypothesis import given, settings, strategies as st

from gvc0 import corpus, load
from gvc0.errors import ParseError, PurityError, TypeCheckError
from gvc0.frontend import check_purity, compatible, framing_audit
from gvc0.parser import parse
from gvc0.printer import expr_str, program_str
from gvc0.syntax import (
    BOOL, INT, NULLT, Binary, CallStmt, Conj, GradualFormula, IntLit, RefType, Unary, VarRef,
    walk,
)


@pytest.mark.parametrize("name", corpus.names())
def test_corpus_parses_and_prints_stably(name):
    prog = parse(corpus.source(name))
    text = program_str(prog)
    again = parse(text)
    assert again == prog
    assert program_str(again) == text


@pytest.mark.parametrize("src, exc, msg", [
    ("int f( { }", ParseError, "expected type"),
    ("int f(int x) { return true; }", TypeCheckError, "type mismatch"),
    ("int f(int x) { return y; }", TypeCheckError, "unbound variable y"),
    ("int f(int x) //@ pure;\n{ int y = 1; return y; }", PurityError, "impure construct"),
    ("int f(int x) { x = 1; return x; }", TypeCheckError, "cannot assign to parameter"),
    ("struct C { int v; };\nint f(struct C* c) //@ requires c->v > 0;\n{ return 1; }",
     TypeCheckError, "not self-framed"),
    ("int m(int x) { return x; }\nint f(int x) //@ requires m(x) > 0;\n{ return 1; }",
     TypeCheckError, "method in specification"),
])
def test_ill_formed_input(src, exc, msg):
    with pytest.raises(exc, match=msg):
        load(src)


def test_error_locations_are_one_based():
    with pytest.raises(TypeCheckError) as info:
        load("int f(int x) { return y; }")
    assert info.value.loc == (1, 23)
    assert str(info.value).startswith("1:23:")


def test_factorial_structure():
    tp = load(corpus.source("factorial"))
    f = tp.functions["pureFactorial"]
    assert f.pre == GradualFormula(False, f.requires[0].body)
    assert expr_str(f.body) == "n == 0 ? 1 : n * pureFactorial(n - 1)"
    m = tp.methods["iterativeFactorial"]
    assert len(m.ensures) == 1
    loop = [n for n in walk(m.body) if type(n).__name__ == "While"][0]
    # the two loop_invariant annotations are conjoined in order
    assert isinstance(loop.invariant.body, Conj)


def test_imprecise_clauses_merge():
    tp = load(corpus.source("double"))
    pre = tp.functions["double"].pre
    assert pre.imprecise
    # `? && acc(y->val)` then the conditional clause
    assert isinstance(pre.body, Conj)


def test_method_calls_get_distinct_node_ids():
    tp = load(corpus.source("cell"))
    ids = [n.nid for n in walk(tp.program)]
    calls = [n for n in walk(tp.program) if isinstance(n, CallStmt)]
    assert calls
    assert len(ids) == len(set(ids))


def test_compatible_types():
    assert compatible(NULLT, RefType("Node"))
    assert compatible(RefType("Node"), NULLT)
    assert not compatible(INT, BOOL)


def test_purity_accepts_double():
    tp = load(corpus.source("double"))
    check_purity(tp.functions["double"])


def test_framing_audit_reports_unframed_reads():
    src = ("struct C { int v; };\n"
           "int g(struct C* c) //@ requires ? && c->v > 0;\n{ return 1; }")
    tp = load(src)
    clause = tp.methods["g"].requires[0]
    missing = framing_audit(clause.body, set(), tp)
    assert [expr_str(m) for m in missing] == ["c->v"]


# ---------------------------------------------------------------------------
# Printer / parser round trip on generated expressions

_leaf = st.one_of(
    st.integers(0, 50).map(lambda v: IntLit(v, ty=INT)),
    st.sampled_from(["a", "b", "c"]).map(lambda n: VarRef(n, ty=INT)),
)


def _arith(children):
    return st.one_of(
        st.tuples(st.sampled_from(["+", "-", "*", "/", "%"]), children, children).map(
            lambda t: Binary(t[0], t[1], t[2], ty=INT)),
        children.map(lambda e: Unary("-", e, ty=INT)),
    )


int_exprs = st.recursive(_leaf, _arith, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(int_exprs)
def test_expression_printing_round_trips(e):
    text = expr_str(e)
    src = f"int f(int a, int b, int c) {{ return {text}; }}"
    prog = parse(src)
    ret = prog.decls[0].body.stmts[0].value
    assert ret == e
