"""Static checks: types, reachability, cycles, variants, recursion."""

import itertools
import random

import pytest

from ibp import model as M
from ibp.analysis import (
    analyze, call_graph_sccs, miracle_scan, reachability_check,
    recursion_check, scc_by_situation, scc_decompose, termination_check,
    type_of, typecheck,
)
from ibp.parser import parse_context, parse_expr
from ibp.prelude import builtin_theory

THEORY = builtin_theory()


def ctx_of(text):
    out = parse_context(text)
    assert isinstance(out, M.VerificationContext), out
    return out


def codes(diags):
    return [d.code for d in diags]


# -- expression typing -----------------------------------------------------------

VARS = {"a": M.SemType.VEC, "x": M.SemType.INT, "n": M.SemType.NAT,
        "p": M.SemType.BOOL}


@pytest.mark.parametrize("src,ty", [
    ("x + n", M.SemType.INT),
    ("n + 1", M.SemType.NAT),
    ("n - 1", M.SemType.INT),          # subtraction leaves nat
    ("len(a)", M.SemType.NAT),
    ("a[n]", M.SemType.INT),
    ("a[n <- x]", M.SemType.VEC),
    ("x < n and p", M.SemType.BOOL),
    ("sorted(a)", M.SemType.BOOL),
    ("if p then n else 0 endif", M.SemType.NAT),
    ("if p then x else n endif", M.SemType.INT),
    ("forall (i: index(a)): a[i] = x", M.SemType.BOOL),
])
def test_type_of(src, ty):
    assert type_of(parse_expr(src), VARS, THEORY) == ty


@pytest.mark.parametrize("src", [
    "x + p",            # int + bool
    "a and p",          # vector as bool
    "q + 1",            # unknown name
    "sorted(x)",        # wrong argument type
    "sorted(a, a)",     # wrong argument type
    "perm(a)",          # wrong arity
    "len(x)",           # len of non-vector
])
def test_type_errors(src):
    with pytest.raises(Exception):
        ty = type_of(parse_expr(src), VARS, THEORY)
        # type_of may instead return a diagnostic-carrying failure; force it
        assert ty is None


GOOD = """
context c {
  procedure p(valres a: vector) {
    pre { }
    post { sorted(a); }
    situation S { k <= len(a); variant len(a) - k; }
    var k: nat;
    transition to S { k := 0; }
    transition from S branch {
      to S { [k < len(a)]; k := k + 1; }
      to Post { [k = len(a)]; }
    }
  }
}
"""


def test_typecheck_accepts_good_program():
    assert typecheck(ctx_of(GOOD), THEORY) == []


@pytest.mark.parametrize("inv,code", [
    ("k + true;", "TYPE002"),
    ("unknown_fn(k);", "TYPE001"),
    ("missing < 3;", "TYPE001"),
])
def test_typecheck_rejects(inv, code):
    text = GOOD.replace("k <= len(a);", inv)
    assert code in codes(typecheck(ctx_of(text), THEORY))


def test_nat_assignment_from_int_expression_is_allowed():
    # nat := int is checked dynamically (the verifier proves it separately)
    text = GOOD.replace("k := k + 1;", "k := k - 1 + 2;")
    assert typecheck(ctx_of(text), THEORY) == []


def test_value_param_passed_as_valres_rejected():
    text = """
context c {
  procedure q(valres y: int) {
    pre { } post { true; } transition to Post { }
  }
  procedure p(x: int) {
    pre { } post { true; }
    transition to Post { q(x); }
  }
}
"""
    assert "TYPE003" in codes(typecheck(ctx_of(text), THEORY))


def test_entry_value_only_readable_where_declared():
    # a_0 refers to entry value of a; fine in post, unknown name for locals
    text = """
context c {
  procedure p(valres a: vector) {
    pre { }
    post { perm(a, a_0); }
    var k: nat;
    transition to Post { k := 0; }
  }
}
"""
    assert typecheck(ctx_of(text), THEORY) == []
    bad = text.replace("perm(a, a_0)", "k_0 = 0")
    # k is a local: no entry value exists
    out = parse_context(bad)
    if isinstance(out, M.VerificationContext):
        assert any(d.code in ("TYPE001", "TYPE003", "RESOLVE003")
                   for d in typecheck(out, THEORY))
    # parse-level rejection is fine too


# -- strongly connected components -------------------------------------------------

def brute_force_sccs(names, edges):
    reach = {n: {n} for n in names}
    changed = True
    while changed:
        changed = False
        for u, vs in edges.items():
            for v in vs:
                new = reach[v] - reach[u]
                if new:
                    reach[u] |= new
                    changed = True
    comps = set()
    for n in names:
        comp = frozenset(m for m in names
                         if m in reach[n] and n in reach[m])
        comps.add(comp)
    return comps


def random_proc(rng):
    n = rng.randint(1, 7)
    names = [f"S{i}" for i in range(n)]
    situations = (
        M.Situation("Pre", M.SituationKind.PRECONDITION, ()),
        M.Situation("Post", M.SituationKind.POSTCONDITION, ()),
        *(M.Situation(s, M.SituationKind.INTERMEDIATE, ()) for s in names),
    )
    all_names = ["Pre", "Post", *names]
    transitions = []
    for i in range(rng.randint(0, 2 * n)):
        src = rng.choice(all_names[2:] + ["Pre"])
        dst = rng.choice(all_names[1:])
        transitions.append(M.Transition(src, dst, (), index=i))
    return M.Procedure("p", (), (), situations, tuple(transitions))


def test_scc_decompose_matches_brute_force():
    rng = random.Random(42)
    for _ in range(200):
        proc = random_proc(rng)
        edges = {s.name: [] for s in proc.all_situations()}
        for t in proc.transitions:
            edges[t.source].append(t.target)
        expected = brute_force_sccs(list(edges), edges)
        got = {info.members for info in scc_decompose(proc)}
        assert got == expected


def test_scc_cyclic_flag():
    proc = ctx_of(GOOD).procedure("p")
    by_name = scc_by_situation(proc)
    assert by_name["S"].cyclic            # self loop
    assert not by_name["Pre"].cyclic
    assert by_name["S"].variant is not None
    assert by_name["S"].variant_owner == "S"


def test_nested_cycle_shares_one_scc():
    text = """
context c {
  procedure p(valres x: int) {
    pre { }
    post { true; }
    situation A { true; variant x; }
    situation B { true; }
    transition to A { }
    transition from A to B { [x > 0]; x := x - 1; }
    transition from B to A { }
    transition from A to Post { [x <= 0]; }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    by_name = scc_by_situation(proc)
    assert by_name["A"] is by_name["B"]
    assert by_name["A"].cyclic and by_name["A"].variant_owner == "A"
    assert termination_check(proc) == []


# -- termination diagnostics --------------------------------------------------------

def test_cycle_without_variant_is_term001():
    text = GOOD.replace("variant len(a) - k;", "")
    proc = ctx_of(text).procedure("p")
    assert codes(termination_check(proc)) == ["TERM001"]


def test_variant_outside_cycle_is_term002():
    text = """
context c {
  procedure p(valres x: int) {
    pre { }
    post { true; }
    situation S { true; variant x; }
    transition to S { }
    transition from S to Post { }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    assert codes(termination_check(proc)) == ["TERM002"]


def test_two_variants_in_one_cycle_is_term001():
    text = """
context c {
  procedure p(valres x: int) {
    pre { }
    post { true; }
    situation A { true; variant x; }
    situation B { true; variant x + 1; }
    transition to A { }
    transition from A to B { }
    transition from B to A { [x > 0]; x := x - 1; }
    transition from A to Post { [x <= 0]; }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    assert codes(termination_check(proc)) == ["TERM001"]


# -- recursion ----------------------------------------------------------------------

REC = """
context c {
  procedure down(valres x: int) {
    pre { x >= 0; }
    post { x = 0; }
    %s
    transition branch {
      to Post { [x = 0]; }
      to Post { [x > 0]; x := x - 1; down(x); }
    }
  }
}
"""


def test_recursive_procedure_needs_variant():
    ctx = ctx_of(REC % "")
    assert codes(recursion_check(ctx)) == ["TERM003"]
    assert call_graph_sccs(ctx) == [frozenset({"down"})]


def test_recursion_variant_accepted():
    ctx = ctx_of(REC % "recursion variant x;")
    assert recursion_check(ctx) == []


def test_variant_on_non_recursive_is_term004():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    recursion variant x;
    transition to Post { }
  }
}
"""
    assert codes(recursion_check(ctx_of(text))) == ["TERM004"]


def test_mutual_recursion_detected():
    text = """
context c {
  procedure a(valres x: int) {
    pre { } post { true; }
    transition to Post { b(x); }
  }
  procedure b(valres x: int) {
    pre { } post { true; }
    transition to Post { a(x); }
  }
}
"""
    ctx = ctx_of(text)
    assert call_graph_sccs(ctx) == [frozenset({"a", "b"})]
    assert codes(recursion_check(ctx)) == ["TERM003", "TERM003"]


# -- reachability and liveness warnings ------------------------------------------------

def test_unreachable_situation_warns():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    situation S { true; }
    situation T { true; }
    transition to S { }
    transition from S to Post { }
    transition from T to Post { }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    diags = reachability_check(proc)
    assert [d.code for d in diags] == ["LIVE002"]
    assert "'T'" in diags[0].message


def test_dead_end_situation_warns():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    situation S { true; }
    transition to S { }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    got = codes(reachability_check(proc))
    assert "LIVE001" in got and "LIVE002" in got  # S dead end, Post unreached


def test_container_situations_are_not_locations():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    situation Out { x >= 0;
      situation In { x > 0; }
    }
    transition to In { [x > 0]; }
    transition from In to Post { }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    # Out is never targeted: reachable through In, exempt from liveness
    assert reachability_check(proc) == []


def test_guard_after_state_change_warns():
    text = """
context c {
  procedure p(valres x: int) {
    pre { } post { true; }
    transition to Post { x := 1; [x > 0]; }
  }
}
"""
    proc = ctx_of(text).procedure("p")
    assert codes(miracle_scan(proc)) == ["LIVE003"]


# -- orchestrator ------------------------------------------------------------------------

def test_analyze_collects_everything():
    text = GOOD.replace("variant len(a) - k;", "") \
               .replace("sorted(a);", "sorted(a) and unknown_fn(a);")
    diags = analyze(ctx_of(text), THEORY)
    assert {"TYPE001", "TERM001"} <= set(codes(diags))


def test_analyze_unknown_strategy_lemma():
    text = GOOD.replace("context c {", "context c {\n  strategy lemmas nope;")
    assert "RESOLVE001" in codes(analyze(ctx_of(text), THEORY))
