"""Expression utilities: substitution, simplification, wp over bodies."""

import pytest

from ibp import model as M
from ibp.parser import parse_expr
from ibp.pretty import pretty


def e(text):
    return parse_expr(text)


# -- substitution ------------------------------------------------------------

def test_substitute_var():
    out = M.substitute(e("x + y"), {"x": e("k * 2")})
    assert pretty(out) == "k * 2 + y"


def test_substitute_old_var():
    out = M.substitute(e("perm(a, a_0)"), {"a": e("swap(a, 0, k)")},
                       {"a": e("b")})
    assert pretty(out) == "perm(swap(a, 0, k), b)"


def test_substitute_is_simultaneous():
    out = M.substitute(e("x + y"), {"x": M.Var("y"), "y": M.Var("x")})
    assert pretty(out) == "y + x"


def test_substitute_does_not_fold_arithmetic():
    out = M.substitute(e("x + 1"), {"x": e("0")})
    assert pretty(out) == "0 + 1"


def test_substitute_shadowed_by_quantifier():
    q = e("forall (i: nat): a[i] = i")
    assert M.substitute(q, {"i": e("99")}) is q


def test_substitute_renames_on_capture():
    # replacing x by i under a binder over i must not capture
    q = e("forall (i: nat): a[i] <= x")
    out = M.substitute(q, {"x": M.Var("i")})
    assert isinstance(out, M.Quant)
    assert out.var != "i"
    assert pretty(out.body).endswith("<= i")
    assert M.free_vars(out) == {"a", "i"}


def test_substitute_identity_returns_same_node():
    q = e("forall (i: nat): a[i] <= x")
    assert M.substitute(q, {"z": e("1")}) is q


def test_free_and_old_vars():
    x = e("perm(a, b_0) and k < len(a)")
    assert M.free_vars(x) == {"a", "k"}
    assert M.old_vars(x) == {"b"}
    q = e("forall (i: nat): a[i] <= m")
    assert M.free_vars(q) == {"a", "m"}


# -- conjunct handling ---------------------------------------------------------

def test_conjuncts_splits_top_level_only():
    parts = M.conjuncts(e("a and (b and c) and (d or f)"))
    assert [pretty(p) for p in parts] == ["a", "b", "c", "d or f"]


def test_conjoin_disjoin_empty():
    assert M.conjoin([]) == M.TRUE
    assert M.disjoin([]) == M.FALSE


def test_conjoin_left_assoc():
    out = M.conjoin([e("p"), e("q"), e("r")])
    assert pretty(out) == "p and q and r"
    assert pretty(out.left) == "p and q"


# -- simplify -----------------------------------------------------------------

@pytest.mark.parametrize("src,expected", [
    ("not (not p)", "p"),
    ("not (p => q)", "p and not q"),
    ("true and p", "p"),
    ("p and false", "false"),
    ("false or p", "p"),
    ("p => true", "true"),
    ("p => false", "not p"),
    ("true <=> p", "p"),
])
def test_simplify(src, expected):
    assert pretty(M.simplify(e(src))) == expected


def test_simplify_keeps_atoms():
    x = e("0 + 1 = 1")
    assert M.simplify(x) is x


# -- wp over statement sequences ----------------------------------------------

def assign(n, v):
    return M.Assign(n, e(v))


def test_wp_assign_is_substitution():
    out = M.wp_body((assign("x", "x + 1"),), e("x <= n"))
    assert pretty(out) == "x + 1 <= n"


def test_wp_sequencing_is_right_to_left():
    body = (assign("x", "y"), assign("y", "x + 1"))
    out = M.wp_body(body, e("y = x + 1"))
    # inner assign first: y -> x+1, then x -> y everywhere
    assert pretty(out) == "y + 1 = y + 1"


def test_wp_guard_and_assert():
    body = (M.Guard(e("x < n")), M.Assert(e("x >= 0")), assign("x", "x + 1"))
    out = M.wp_body(body, e("x <= n"))
    assert pretty(out) == "x < n => x >= 0 and x + 1 <= n"


def test_wp_conjunctivity_syntactic():
    body = (M.Guard(e("x < n")), assign("x", "x * 2"))
    p, q = e("x <= n"), e("0 <= x")
    both = M.wp_body(body, M.BinOp("and", p, q))
    left = M.wp_body(body, p)
    right = M.wp_body(body, q)
    # for guard/assign bodies wp distributes over `and` up to simplification
    assert pretty(M.simplify(both)) == "x < n => x * 2 <= n and 0 <= x * 2"
    assert pretty(M.simplify(left)) == "x < n => x * 2 <= n"
    assert pretty(M.simplify(right)) == "x < n => 0 <= x * 2"


# -- enabledness ----------------------------------------------------------------

def transition(*stmts):
    return M.Transition(source="S", target="T", body=tuple(stmts), index=0)


def test_enabledness_collects_guards():
    t = transition(M.Guard(e("x < n")), assign("x", "x + 1"),
                   M.Guard(e("x <= n")))
    out = M.enabledness(t)
    assert pretty(out) == "x < n and x + 1 <= n"


def test_enabledness_ignores_asserts():
    t = transition(M.Assert(e("false")), M.Guard(e("x < n")))
    assert pretty(M.enabledness(t)) == "x < n"


def test_enabledness_call_is_never_miraculous():
    t = transition(M.Guard(e("p")), M.Call("f", (e("x"),)))
    assert pretty(M.enabledness(t)) == "p"


def test_enabledness_unguarded_body_is_true():
    t = transition(assign("x", "0"))
    assert M.enabledness(t) == M.TRUE


# -- head guards / situations ---------------------------------------------------

def test_head_guards_stop_at_first_non_guard():
    body = (M.Guard(e("p")), M.Guard(e("q")), assign("x", "0"),
            M.Guard(e("r")))
    assert [pretty(g) for g in M.head_guards(body)] == ["p", "q"]


def test_effective_invariants_outermost_first():
    inner = M.Situation("In", M.SituationKind.INTERMEDIATE,
                        (e("q1"), e("q2")))
    outer = M.Situation("Out", M.SituationKind.INTERMEDIATE,
                        (e("p"),), children=(inner,))
    assert [pretty(x) for x in M.effective_invariant_exprs(inner)] \
        == ["p", "q1", "q2"]
    assert inner.parent is outer
