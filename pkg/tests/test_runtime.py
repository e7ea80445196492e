import math

import pytest
from hypothesis import given, strategies as st

from gvc0 import corpus, load
from gvc0.runtime import (
    BudgetExceeded, CheckFailure, ConcreteHeap, Interpreter, Ref, RuntimeFault,
    eval_pure_concrete, interpret, parse_args, show,
)
from gvc0.syntax import BOOL, INT, PredInst, RefType, VarRef

from conftest import corpus_report


def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


@pytest.mark.parametrize("prog, fn, oracle", [
    ("factorial", "pureFactorial", math.factorial),
    ("fib", "fib", fib),
    ("sum", "sumTo", lambda n: n * (n + 1) // 2),
])
@pytest.mark.parametrize("n", [0, 1, 5, 8])
def test_pure_functions_match_closed_forms(prog, fn, oracle, n):
    assert eval_pure_concrete(load(corpus.source(prog)), fn, [n]) == oracle(n)


def test_known_factorials():
    tp = load(corpus.source("factorial"))
    assert [eval_pure_concrete(tp, "pureFactorial", [n]) for n in (0, 5, 8)] == [1, 120, 40320]


def test_function_precondition_is_checked():
    tp = load(corpus.source("factorial"))
    with pytest.raises(CheckFailure, match="n >= 0"):
        eval_pure_concrete(tp, "pureFactorial", [-1])


def test_double_on_a_concrete_heap():
    tp = load(corpus.source("double"))
    heap = ConcreteHeap()
    x, y = heap.alloc({"val": 3}), heap.alloc({"val": 9})
    assert eval_pure_concrete(tp, "double", [True, x, y, x], heap=heap) == 6
    assert eval_pure_concrete(tp, "double", [False, x, y, y], heap=heap) == 18


@pytest.mark.parametrize("prog", ["imprecise_factorial", "factorial"])
def test_iterative_factorial_runs(prog):
    tp, r = corpus_report(prog)
    value, it = interpret(tp, r, "iterativeFactorial", [6])
    assert value == 720
    if prog == "imprecise_factorial":
        assert it.stats.checks_evaluated >= 2


def test_mutant_fails_its_postcondition_check():
    tp, r = corpus_report("imprecise_factorial_bug")
    with pytest.raises(CheckFailure) as info:
        interpret(tp, r, "iterativeFactorial", [6])
    assert info.value.check.kind == "post"
    assert info.value.env["\\result"] == "120"
    assert info.value.stack == ["iterativeFactorial"]


def test_mutant_without_checks_returns_wrong_value():
    tp = load(corpus.source("imprecise_factorial_bug"))
    value, _ = interpret(tp, None, "iterativeFactorial", [6])
    assert value == 120


def test_imprecise_client_checks_permissions():
    tp, r = corpus_report("double")
    with pytest.raises(CheckFailure, match=r"acc\(y->val\)"):
        interpret(tp, r, "imprecise_client", [False, None, None])


def test_null_dereference_is_a_fault():
    tp = load("""struct C { int v; };
int get(struct C* c)
  //@ requires true;
  //@ ensures true;
{ return c->v; }
""")
    with pytest.raises(RuntimeFault, match="null"):
        interpret(tp, None, "get", [None])


def test_division_by_zero_is_a_fault():
    tp = load("""int q(int a, int b)
  //@ requires true;
  //@ ensures true;
{ return a / b; }
""")
    assert interpret(tp, None, "q", [-7, 2])[0] == -3
    with pytest.raises(RuntimeFault, match="division by zero"):
        interpret(tp, None, "q", [1, 0])


def test_step_budget():
    tp = load("""int spin(int n)
  //@ requires true;
  //@ ensures true;
{ int i = n; while (true) { i = i + 1; } return i; }
""")
    with pytest.raises(BudgetExceeded):
        interpret(tp, None, "spin", [0], step_budget=1000)


def test_cyclic_predicate_hits_depth_budget():
    tp = load("""struct N { struct N* next; };
//@ predicate seg(struct N* x) = x == NULL ? true : acc(x->next) && seg(x->next);
""")
    heap = ConcreteHeap()
    a = heap.alloc({"next": None})
    heap.write(a, "next", a, (0, 0))
    it = Interpreter(tp, heap=heap, predicate_depth=50)
    it._push("probe", {"a": a}, (0, 0))
    with pytest.raises(BudgetExceeded):
        it.holds(_seg_of("a"))


def _seg_of(var):
    return PredInst("seg", (VarRef(var),))


def test_acyclic_predicate_holds():
    tp = load("""struct N { struct N* next; };
//@ predicate seg(struct N* x) = x == NULL ? true : acc(x->next) && seg(x->next);
""")
    heap = ConcreteHeap()
    a = heap.alloc({"next": heap.alloc({"next": None})})
    it = Interpreter(tp, heap=heap)
    it._push("probe", {"a": a}, (0, 0))
    assert it.holds(_seg_of("a"))


def test_parse_args():
    ref = RefType("Node")
    assert parse_args("6", [INT]) == [6]
    assert parse_args("true, -3,null", [BOOL, INT, ref]) == [True, -3, None]
    assert parse_args("", []) == []
    for text, types in [("1", []), ("x", [INT]), ("1", [BOOL]), ("7", [ref])]:
        with pytest.raises(ValueError):
            parse_args(text, types)


@given(st.one_of(st.integers(), st.booleans(), st.none()))
def test_show_parses_back(v):
    t = BOOL if isinstance(v, bool) else INT if isinstance(v, int) else RefType("N")
    assert parse_args(show(v), [t]) == [v]


def test_refs_print_as_addresses():
    assert show(Ref(3)) == "#3"
