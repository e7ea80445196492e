import pytest

from gvc0 import SolverSession, corpus, load
from gvc0.engine import Engine
from gvc0.funcs import (
    MAX_PASSES, dependency_graph, function_components, recursive_predicates,
    reject_inadmissible_pre,
)
from gvc0.methods import function_phase
from gvc0.printer import gradual_str
from gvc0.runtime import eval_pure_concrete
from gvc0.smt import Validity
from gvc0.terms import INT, UNIT, FApp, Sym, lit, mk_eq

from conftest import corpus_report, verify_source

HEAP_FREE_RECURSIVE = [("factorial", "pureFactorial"), ("fib", "fib"), ("sum", "sumTo")]


def test_factorial_definitional_axiom():
    _, r = corpus_report("factorial")
    info = r.functions["pureFactorial"]
    a1, a2, a3 = (ax.text for ax in info.axioms)
    assert a1 == ("(forall (($s Snap) (n$ Int)) (! (= (pureFactorial $s n$) "
                  "(pureFactorial%limited $s n$)) :pattern ((pureFactorial $s n$)) "
                  ":qid pureFactorial%A1))")
    assert a2 == ("(forall (($s Snap) (n$ Int)) (! (=> (>= n$ 0) (= (pureFactorial $s n$) "
                  "(ite (= n$ 0) 1 (* n$ (pureFactorial%limited unit (- n$ 1)))))) "
                  ":pattern ((pureFactorial $s n$)) :qid pureFactorial%A2))")
    # the postcondition axiom is triggered by the limited symbol
    assert ":pattern ((pureFactorial%limited $s n$))" in a3
    assert info.extensions == [] and info.checks == []


def test_double_single_guarded_extension():
    _, r = corpus_report("double")
    info = r.functions["double"]
    assert [(e.function, e.access, e.guard) for e in info.extensions] == [("double", "x->val", "b")]
    assert info.extensions[0].path == ("right", "left")
    assert gradual_str(info.extended_pre) == (
        "? && acc(y->val) && (b ? z == x : z == y) && ((b ? acc(x->val) : true) && true)")
    declared = [(m.location, m.path, m.origin) for m in info.snapshot_map]
    assert declared == [("y->val", ("left", "left"), "declared"),
                        ("x->val", ("right", "left"), "extended")]


def test_precise_double_needs_no_extension():
    _, r = corpus_report("double_precise")
    assert r.functions["double"].extensions == []
    assert r.entry("double").verdict == "verified"


def test_extensions_chain_through_fields():
    src = """struct Node { int val; struct Node* next; };
int second(struct Node* x)
  //@ pure;
  //@ requires ? && x != NULL;
{ return x->next->val; }
"""
    _, r = verify_source(src)
    assert [(e.access, e.guard) for e in r.entry("second").extensions] == [
        ("x->next", "true"), ("x->next->val", "true")]


def test_predicate_extension_fails_with_reason():
    src = """struct Node { int val; };
//@ predicate p(struct Node* x) = acc(x->val);
int viaPred(struct Node* x)
  //@ pure;
  //@ requires ?;
{ return unfolding p(x) in x->val; }
"""
    _, r = verify_source(src)
    e = r.entry("viaPred")
    assert e.verdict == "static-failure"
    assert "cannot extend the precondition of viaPred" in e.diagnostics[0]


def test_precise_function_without_permission_fails():
    src = """struct Node { int val; };
int get(struct Node* x)
  //@ pure;
  //@ requires x != NULL;
{ return x->val; }
"""
    _, r = verify_source(src)
    assert r.entry("get").verdict == "static-failure"
    assert "insufficient permission" in r.entry("get").diagnostics[0]


def test_wrong_function_postcondition_fails():
    src = """int inc(int n)
  //@ pure;
  //@ ensures \\result > n + 1;
{ return n + 1; }
"""
    _, r = verify_source(src)
    assert r.entry("inc").verdict == "static-failure"


# ---------------------------------------------------------------------------
# Admissibility

def test_rejects_imprecise_recursive_predicate_pre():
    tp, r = corpus_report("reject_list")
    e = r.entry("first")
    assert e.verdict == "rejected"
    assert "equi-recursive" in e.diagnostics[0] and "list" in e.diagnostics[0]
    assert recursive_predicates(tp) == {"list"}


def test_rejects_self_application_in_pre():
    _, r = corpus_report("reject_self")
    assert r.entry("loopy").verdict == "rejected"
    assert "transitively contains an application of loopy" in r.entry("loopy").diagnostics[0]


def test_rejects_through_predicate_bodies():
    src = """struct Node { int val; };
//@ predicate p(struct Node* x) = acc(x->val) && g(x) > 0;
int g(struct Node* x)
  //@ pure;
  //@ requires p(x);
{ return 1; }
"""
    tp = load(src)
    assert "transitively contains" in reject_inadmissible_pre(tp.functions["g"], tp)


def test_accepts_imprecise_nonrecursive_predicate_pre():
    _, r = corpus_report("cell")
    assert r.entry("peek").verdict == "verified"


def test_precise_recursive_predicate_pre_is_fine():
    _, r = corpus_report("list")
    assert r.entry("head").verdict == "verified"


def test_rejected_function_cascades_to_callers():
    src = """int loopy(int n)
  //@ pure;
  //@ requires loopy(n) >= 0;
{ return n; }
int user(int n)
  //@ requires true;
  //@ ensures true;
{ int v = loopy(n); return v; }
"""
    _, r = verify_source(src)
    assert r.entry("loopy").verdict == "rejected"
    assert r.entry("user").verdict == "static-failure"
    assert "did not pass verification" in r.entry("user").diagnostics[0]


def test_components_are_callee_first():
    src = """int a(int n) //@ pure;
{ return b(n) + 1; }
int b(int n) //@ pure;
//@ requires n >= 0;
{ return n == 0 ? 0 : c(n - 1); }
int c(int n) //@ pure;
//@ requires n >= 0;
{ return b(n); }
int d(int n) //@ pure;
{ return n; }
"""
    tp = load(src)
    comps = function_components(tp)
    assert comps.index(["b", "c"]) < comps.index(["a"])
    assert sorted(sum(comps, [])) == ["a", "b", "c", "d"]
    g = dependency_graph(tp)
    assert ("func", "b") in g and ("func", "c") in g


# ---------------------------------------------------------------------------
# Axioms agree with direct evaluation

@pytest.mark.parametrize("prog, fn", HEAP_FREE_RECURSIVE)
@pytest.mark.parametrize("n", range(0, 9))
def test_axioms_agree_with_interpreter(prog, fn, n):
    tp = load(corpus.source(prog))
    expected = eval_pure_concrete(tp, fn, [n])
    with SolverSession() as s:
        function_phase(Engine(tp, s))
        # name the smaller applications so that instantiation has ground terms to match
        facts = [mk_eq(Sym(INT, f"v{k}"), FApp(INT, fn, (UNIT, lit(k)))) for k in range(n)]
        app = FApp(INT, fn, (UNIT, lit(n)))
        assert s.check_valid(facts, mk_eq(app, lit(expected))) is Validity.VALID
        assert s.check_valid(facts, mk_eq(app, lit(expected + 1))) is not Validity.VALID


def test_pass_limit_is_generous():
    assert MAX_PASSES >= 4
