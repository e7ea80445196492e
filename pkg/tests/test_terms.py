import pytest
from hypothesis import given, settings, strategies as st

from gvc0.errors import InternalError
from gvc0.smt import SolverSession, Validity
from gvc0.terms import (
    FALSE, INT, SNAP, TRUE, UNIT, App, FreshSymbols, Leaf, Pair, Sym, Unit, lit, mk_and, mk_arith,
    mk_div, mk_eq, mk_ite, mk_mod, mk_not, mk_or, shape, snap_term, snapshot_project, substitute,
    symbols, term_str, unwrap, wrap,
)


def c_div(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


@given(st.integers(-1000, 1000), st.integers(-50, 50).filter(bool))
def test_literal_division_truncates(a, b):
    assert mk_div(lit(a), lit(b)) == lit(c_div(a, b))
    assert mk_mod(lit(a), lit(b)) == lit(a - b * c_div(a, b))


@pytest.mark.parametrize("a, b, q", [(-7, 2, -3), (7, -2, -3), (-7, -2, 3), (7, 2, 3)])
def test_symbolic_division_matches_c(session, a, b, q):
    x, y = Sym(INT, "x"), Sym(INT, "y")
    facts = [mk_eq(x, lit(a)), mk_eq(y, lit(b))]
    assert session.check_valid(facts, mk_eq(mk_div(x, y), lit(q))) is Validity.VALID


def test_boolean_simplification():
    p = Sym("Bool", "p")
    assert mk_and() == TRUE and mk_or() == FALSE
    assert mk_and(p, TRUE, p) == p
    assert mk_and(p, FALSE) == FALSE
    assert mk_not(mk_not(p)) == p
    assert mk_ite(TRUE, lit(1), lit(2)) == lit(1)
    assert mk_eq(lit(3), lit(3)) == TRUE


def test_wrap_unwrap_cancel():
    v = Sym(INT, "v")
    assert unwrap(wrap(v), INT) == v
    s = Sym(SNAP, "s")
    assert wrap(unwrap(s, INT)) == s


def test_fresh_symbols_are_unique():
    fresh = FreshSymbols()
    names = {fresh(INT, "x->val").name for _ in range(50)}
    assert len(names) == 50
    assert all("@" in n and "-" not in n for n in names)


def test_substitute_resimplifies():
    x = Sym(INT, "x")
    t = mk_arith("+", x, lit(1))
    assert substitute(t, {x: lit(4)}) == lit(5)
    assert symbols(t) == {x}
    assert term_str(t) == "(+ x 1)"


# ---------------------------------------------------------------------------
# Snapshot trees

def _trees():
    counter = iter(range(10**6))
    leaf = st.builds(lambda: Leaf(Sym(INT, f"v{next(counter)}")))
    return st.recursive(st.one_of(leaf, st.just(Unit())),
                        lambda ch: st.builds(Pair, ch, ch), max_leaves=10)


def _paths(t, prefix=()):
    match t:
        case Pair(left=l, right=r):
            yield from _paths(l, prefix + ("left",))
            yield from _paths(r, prefix + ("right",))
        case _:
            yield prefix, t


@given(_trees())
def test_snapshot_projection_follows_paths(tree):
    term = snap_term(tree)
    for path, sub in _paths(tree):
        got = snapshot_project(tree, list(path))
        if isinstance(sub, Leaf):
            assert got == sub.term
            # projecting the encoded tree selects the same leaf
            assert snapshot_project(Leaf(term), list(path)) == wrap(sub.term)
        else:
            assert got == sub


@given(_trees())
def test_shape_matches_structure(tree):
    s = shape(tree)
    if isinstance(tree, Pair):
        assert isinstance(s, tuple) and len(s) == 2
    else:
        assert s in ("unit", "leaf")


def test_invalid_paths_are_rejected():
    with pytest.raises(InternalError):
        snapshot_project(Unit(), ["left"])
    with pytest.raises(InternalError):
        snapshot_project(Pair(Unit(), Unit()), ["up"])


def test_unit_snapshot_term():
    assert snap_term(Unit()) == UNIT
    assert snap_term(Pair(Unit(), Unit())) == App(SNAP, "combine", (UNIT, UNIT))


@settings(max_examples=40, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30).filter(bool))
def test_solver_agrees_with_c_division(a, b):
    with SolverSession() as s:
        x = Sym(INT, "x")
        facts = [mk_eq(x, lit(a))]
        assert s.check_valid(facts, mk_eq(mk_div(x, lit(b)), lit(c_div(a, b)))) is Validity.VALID
        assert s.check_valid(facts, mk_eq(mk_mod(x, lit(b)),
                                          lit(a - b * c_div(a, b)))) is Validity.VALID
