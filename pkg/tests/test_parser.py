"""Parsing: expression round-trips, desugaring, diagnostics."""

import pytest

from ibp import model as M
from ibp.parser import ParseError, parse_context, parse_expr, parse_theory_module
from ibp.pretty import pretty, pretty_statement
from ibp.source import Diagnostic


def ctx_of(text):
    out = parse_context(text)
    assert isinstance(out, M.VerificationContext), out
    return out


def errors_of(text):
    out = parse_context(text)
    assert isinstance(out, list) and out, "expected diagnostics"
    return out


# -- expressions ---------------------------------------------------------------

ROUND_TRIPS = [
    "x + y * z",
    "(x + y) * z",
    "x - y - z",
    "x - (y - z)",
    "a[i] <= a[j]",
    "a[i <- x][j]",
    "len(a) - 1",
    "not p and q or r",
    "not (p and q)",
    "p => q => r",
    "(p => q) => r",
    "p <=> q",
    "x /= y",
    "-x * y",
    "-(x * y)",
    "x div 2 + 1",
    "swap(a, 0, k - 1)",
    "if x < 0 then 0 - x else x endif",
    "forall (i: nat): a[i] = 0",
    "exists (i: int, j: int): i < j",
]


@pytest.mark.parametrize("src", ROUND_TRIPS)
def test_pretty_round_trip(src):
    first = parse_expr(src)
    assert isinstance(first, M.Expr), first
    again = parse_expr(pretty(first))
    assert isinstance(again, M.Expr), again
    assert pretty(again) == pretty(first)


def test_ne_synonym():
    assert pretty(parse_expr("x != y")) == "x /= y"


def test_implication_right_assoc():
    e = parse_expr("p => q => r")
    assert pretty(e.right) == "q => r"


def test_old_var_parses():
    e = parse_expr("perm(a, a_0)")
    assert isinstance(e.args[1], M.OldVar)
    assert e.args[1].name == "a"


def test_reserved_generated_names_rejected():
    d = parse_expr("a_1 + 1")
    assert isinstance(d, Diagnostic)
    assert d.code == "PARSE002"


def test_if_elsif_desugars_to_nested_ite():
    e = parse_expr("if p then 1 elsif q then 2 else 3 endif")
    assert isinstance(e, M.Ite) and isinstance(e.other, M.Ite)
    assert pretty(e) == "if p then 1 elsif q then 2 else 3 endif"


def test_quantifier_range_sugar():
    e = parse_expr("forall (i: index(a)): a[i] >= 0")
    assert pretty(e) == "forall (i: nat): i < len(a) => a[i] >= 0"
    e = parse_expr("exists (i: upto(n)): a[i] = 0")
    assert pretty(e) == "exists (i: nat): i <= n and a[i] = 0"
    e = parse_expr("forall (i: below(n)): a[i] = 0")
    assert pretty(e) == "forall (i: nat): i < n => a[i] = 0"


def test_quantifier_groups_desugar_each_var():
    e = parse_expr("forall (i, j: index(a)): i < j => a[i] <= a[j]")
    # one binder per variable, each range guard directly under its binder
    assert isinstance(e, M.Quant)
    assert isinstance(e.body.right, M.Quant)
    assert pretty(e) == ("forall (i: nat): i < len(a) =>"
                         " (forall (j: nat): j < len(a) =>"
                         " i < j => a[i] <= a[j])")


def test_expr_span_points_into_source():
    e = parse_expr("  x + y")
    assert e.span.start_line == 1 and e.span.start_col == 3


# -- program structure -----------------------------------------------------------

SKELETON = """
context c {
  procedure p(valres x: int) {
    pre { x >= 0; }
    post Done { x = 0; }
    situation S { x >= 0; variant x; }
    transition to S { }
    transition from S branch {
      to S { [x > 0]; x := x - 1; }
      to Done { [x = 0]; }
    }
  }
}
"""


def test_context_shape():
    ctx = ctx_of(SKELETON)
    assert ctx.name == "c"
    p = ctx.procedure("p")
    assert [s.name for s in p.all_situations()] == ["Pre", "Done", "S"]
    assert p.precondition.name == "Pre"
    assert p.params[0].valres


def test_entry_transition_defaults_to_precondition():
    p = ctx_of(SKELETON).procedure("p")
    assert p.transitions[0].source == "Pre"
    assert p.transitions[0].target == "S"


def test_branch_desugars_to_leaves_with_group():
    p = ctx_of(SKELETON).procedure("p")
    leaves = [t for t in p.transitions if t.index == 1]
    assert [(t.branch, t.target) for t in leaves] == [(0, "S"), (1, "Done")]
    # no shared statements before the branch: empty head
    assert leaves[0].group_head == ()


def test_branch_shared_prefix_and_heads():
    ctx = ctx_of("""
context c {
  procedure p(valres x: int) {
    pre { }
    post { x = 0; }
    situation S { true; }
    transition to S { }
    transition from S { [x /= 1]; x := x * 2; } branch {
      to S { [x > 0]; }
      branch {
        to S { [x < 0]; }
        to Post { [x = 0]; x := 0; }
      }
    }
  }
}
""")
    p = ctx.procedure("p")
    leaves = [t for t in p.transitions if t.index == 1]
    assert len(leaves) == 3
    # every leaf repeats the shared prefix
    for t in leaves:
        assert pretty_statement(t.body[0]) == "[x /= 1];"
        assert pretty_statement(t.body[1]) == "x := x * 2;"
    # the declaration-level head guard is the shared prefix's leading guard
    assert [pretty(g) for g in leaves[0].group_head] == ["x /= 1"]


def test_single_leaf_has_no_branch_tag():
    p = ctx_of(SKELETON).procedure("p")
    assert p.transitions[0].branch is None


def test_call_statement_with_and_without_keyword():
    ctx = ctx_of("""
context c {
  procedure q(valres y: int) {
    pre { }
    post { true; }
    transition to Post { }
  }
  procedure p(valres x: int) {
    pre { }
    post { true; }
    transition to Post { call q(x); q(x); }
  }
}
""")
    body = ctx.procedure("p").transitions[0].body
    assert all(isinstance(s, M.Call) and s.proc == "q" for s in body)


def test_nested_situations_parse():
    ctx = ctx_of("""
context c {
  procedure p(valres x: int) {
    pre { }
    post { true; }
    situation Out { x >= 0;
      situation In1 { x > 0; variant x; }
      situation In2 { x = 0; }
    }
    transition to In1 { [x > 0]; }
    transition from In1 to In2 { [x = 0]; }
    transition from In2 to Post { }
  }
}
""")
    p = ctx.procedure("p")
    out = p.situation("Out")
    assert [c.name for c in out.children] == ["In1", "In2"]
    assert p.situation("In1").parent is out


# -- negatives -------------------------------------------------------------------

def test_missing_context_wrapper():
    (d,) = errors_of("procedure p() { }")
    assert d.code == "PARSE001"


def test_assign_to_reserved_name():
    (d,) = errors_of("""
context c {
  procedure p(valres a: vector) {
    pre { } post { true; }
    transition to Post { a_0 := a; }
  }
}
""")
    assert d.code == "PARSE002"


@pytest.mark.parametrize("snippet,code", [
    # unknown target situation
    ("transition to Nowhere { }", "RESOLVE001"),
    # assignment to undeclared name
    ("transition to Post { y := 1; }", "RESOLVE001"),
    # call to unknown procedure
    ("transition to Post { f(x); }", "RESOLVE001"),
])
def test_resolve_errors(snippet, code):
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    %s
  }
}
""" % snippet
    assert any(d.code == code for d in errors_of(text))


def test_duplicate_situation():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    situation S { true; }
    situation S { true; }
    transition to S { } transition from S to Post { }
  }
}
"""
    assert any(d.code == "RESOLVE002" for d in errors_of(text))


def test_missing_postcondition():
    text = """
context c {
  procedure p(valres x: int) {
    pre { }
    transition to Pre { }
  }
}
"""
    codes = {d.code for d in errors_of(text)}
    assert "RESOLVE003" in codes


def test_postcondition_may_not_mention_locals():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { k = 0; }
    var k: nat;
    transition to Post { k := 0; }
  }
}
"""
    assert any(d.code == "RESOLVE003" for d in errors_of(text))


def test_valres_argument_must_be_variable():
    text = """
context c {
  procedure q(valres y: int) {
    pre { } post { true; } transition to Post { }
  }
  procedure p(valres x: int) {
    pre { } post { true; }
    transition to Post { q(x + 1); }
  }
}
"""
    assert any(d.code == "RESOLVE003" for d in errors_of(text))


# -- theories ---------------------------------------------------------------------

def test_theory_module_parses():
    th = parse_theory_module("""
theory t {
  def smallest(a: vector, n: index(a)): bool =
    forall (i: index(a)): a[n] <= a[i];
  opaque def mystery(x: int): int = x * x;
  uninterpreted weight(x: int): int;
  lemma smallest_zero: forall (x: vector): len(x) = 0 => true;
  trigger smallest_zero: len(x);
}
""")
    assert [d.name for d in th.defs] == ["smallest", "mystery", "weight"]
    assert th.defs[0].body is not None and not th.defs[0].opaque
    assert th.defs[1].opaque
    assert th.defs[2].body is None
    assert th.lemmas[0].name == "smallest_zero"
    assert th.triggers[0].lemma == "smallest_zero"


def test_theory_parse_error_is_list():
    out = parse_theory_module("theory t { def broken }")
    assert isinstance(out, list) and out[0].code == "PARSE001"
