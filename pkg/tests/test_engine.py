
import pytest
from hypothesis import HealthCheck, given, settings

from gvc0 import load
from gvc0.engine import Engine
from gvc0.errors import VerificationFailure
from gvc0.state import SymbolicState
from gvc0.syntax import RefType, VarRef
from gvc0.terms import NULL, REF, Leaf, Sym, lit, mk_eq, mk_not, shape

from support import (
    SITE, assert_heaps_preserved, call_sites, double_engine_for, initial_state, round_trip,
    round_trip_cases,
)


@pytest.fixture(scope="module")
def double_engine():
    with double_engine_for() as eng:
        yield eng


def _formula(tp, src_clause: str, env: str):
    prog = load(f"struct Node {{ int val; }};\nint m({env})\n  //@ requires {src_clause};\n"
                "{ return 0; }")
    return prog, prog.methods["m"].pre


def test_produce_adds_chunk_with_nonnull_receiver(session):
    tp, pre = _formula(None, "acc(x->val) && x->val > 3", "struct Node* x")
    eng = Engine(tp, session)
    st0 = initial_state(eng, {"x": RefType("Node")})
    [st] = eng.produce_g(st0, pre, None, SITE)
    [chunk] = st.heap
    assert chunk.receiver == st0.store["x"] and chunk.field == "val"
    assert mk_not(mk_eq(chunk.receiver, NULL)) in st.pc


def test_duplicate_permission_is_a_conflict(session):
    tp, pre = _formula(None, "acc(x->val) && acc(y->val) && x == y",
                       "struct Node* x, struct Node* y")
    eng = Engine(tp, session)
    st0 = initial_state(eng, {"x": RefType("Node"), "y": RefType("Node")})
    # produce yields a state whose path condition is contradictory
    states = eng.produce_g(st0, pre, None, SITE)
    assert all(session.check_sat(list(s.pc)) == "unsat" for s in states)


def test_consume_without_permission_fails_when_precise(session):
    tp, pre = _formula(None, "acc(x->val)", "struct Node* x")
    eng = Engine(tp, session)
    st0 = initial_state(eng, {"x": RefType("Node")})
    with pytest.raises(VerificationFailure, match="no permission for acc"):
        eng.consume_g(st0, pre, SITE)


def test_consume_without_permission_records_check_when_imprecise(session):
    tp, pre = _formula(None, "acc(x->val)", "struct Node* x")
    eng = Engine(tp, session)
    st0 = initial_state(eng, {"x": RefType("Node")})
    [(st, snap)] = eng.consume_g(SymbolicState(imprecise=True, store=st0.store), pre, SITE)
    [chk] = st.checks
    assert chk.kind == "assert" and chk.text == "acc(x->val)"
    assert isinstance(snap, Leaf)


def test_consume_reads_values_it_consumes(session):
    tp, pre = _formula(None, "acc(x->val) && x->val == 3", "struct Node* x")
    eng = Engine(tp, session)
    st0 = initial_state(eng, {"x": RefType("Node")})
    [st] = eng.produce_g(st0, pre, None, SITE)
    [(after, snap)] = eng.consume_g(st, pre, SITE)
    assert after.heap == () and shape(snap) == ("leaf", "unit")


def test_branch_prunes_infeasible_side(session):
    tp, _ = _formula(None, "true", "int n")
    eng = Engine(tp, session)
    n = Sym("Int", "n")
    st = SymbolicState(store={"n": n}).assume(mk_eq(n, lit(0)))
    cond = mk_eq(n, lit(0))
    sides = eng.branch(st, cond, VarRef("n"), (1, "branch"))
    assert [positive for _, positive in sides] == [True]


def test_alloc_defaults_and_distinctness(session):
    tp, _ = _formula(None, "true", "struct Node* x")
    eng = Engine(tp, session)
    x = Sym(REF, "x")
    st0 = SymbolicState(store={"x": x})
    st, r = eng.alloc(st0, "Node")
    [chunk] = st.heap
    assert chunk.value == lit(0)
    assert session.check_valid(st.pc, mk_not(mk_eq(r, x))).name == "VALID"
    assert session.check_valid(st.pc, mk_not(mk_eq(r, NULL))).name == "VALID"


def test_optimistic_read_records_field_access_check(session):
    tp = load("struct Node { int val; };\nint m(struct Node* x)\n  //@ requires ?;\n"
              "{ return x->val; }")
    eng = Engine(tp, session)
    st = SymbolicState(imprecise=True, store={"x": Sym(REF, "x")})
    ret = tp.methods["m"].body.stmts[0].value
    [(st2, v)] = eng.eval(st, ret)
    [chk] = st2.checks
    assert chk.kind == "field-access" and chk.text == "acc(x->val)"
    assert chk.anchor == (ret.nid, "")
    # a second read reuses the optimistic chunk without a new check
    [(st3, v2)] = eng.eval(st2, ret)
    assert v2 == v and len(st3.checks) == 1


# ---------------------------------------------------------------------------
# Produce/consume round trip over the corpus

ROUND_TRIP = round_trip_cases()


@pytest.mark.parametrize("name, label", ROUND_TRIP)
def test_produce_consume_round_trip(name, label):
    round_trip(name, label)


def test_round_trip_covers_enough_formulas():
    assert len(ROUND_TRIP) >= 15


# ---------------------------------------------------------------------------
# Function application leaves the heap alone

@settings(max_examples=100, deadline=None,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(call_sites())
def test_function_application_preserves_heaps(double_engine, site):
    assert_heaps_preserved(double_engine, site)
