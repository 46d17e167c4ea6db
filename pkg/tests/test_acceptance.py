"""End-to-end outcomes across the bundled corpus.

One test per promised behaviour: which programs verify completely, which
single obligations fail and what their sequents look like, and what the
lemma audit, runtime oracle, wp property suite, and countermodel sweep
guarantee.  Each corpus program is solved at most once per session; the
verdicts are shared between tests.
"""

import random
import time
from pathlib import Path
from typing import NamedTuple

from ibp import analysis, interp, smt, vcgen
from ibp import model as M
from ibp.parser import parse_context
from ibp.prelude import (builtin_theory, lemma_soundness_suite, load_theory,
                         resolve_strategy)
from ibp.pretty import pretty

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CONFIG = smt.SolverConfig(smt.default_solver_command(), timeout_ms=60_000)

PROGRAMS = sorted(p.name for p in CORPUS.glob("*.ibp"))


class Checked(NamedTuple):
    ctx: M.VerificationContext
    theory: object
    report: smt.Report
    wall: float
    diags: list


_loaded: dict = {}
_checked: dict = {}


def load_only(name):
    """Parse, resolve imports, analyze -- no solving."""
    if name in _loaded:
        return _loaded[name]
    path = CORPUS / name
    ctx = parse_context(path.read_text(), str(path))
    assert isinstance(ctx, M.VerificationContext), ctx
    theory = builtin_theory()
    for imp in ctx.imports:
        loaded = load_theory((CORPUS / f"{imp}.ibt").read_text(),
                             f"{imp}.ibt", theory)
        assert not isinstance(loaded, list), loaded
        theory = loaded
    diags = analysis.analyze(ctx, theory)
    assert not [d for d in diags if d.severity == "error"], diags
    _loaded[name] = (ctx, theory, diags)
    return _loaded[name]


def checked(name) -> Checked:
    """Full pipeline with the program's own strategy lemmas, solved once."""
    if name in _checked:
        return _checked[name]
    ctx, theory, diags = load_only(name)
    lemmas, bad = resolve_strategy(ctx.strategy_lemmas, theory)
    assert not bad, bad
    t0 = time.monotonic()
    report = smt.check_all(vcgen.generate_all(ctx, theory), theory, lemmas,
                           CONFIG)
    entry = Checked(ctx, theory, report, time.monotonic() - t0, diags)
    _checked[name] = entry
    return entry


def exit_code(report: smt.Report) -> int:
    if report.counts()[smt.ERROR]:
        return 2
    return 0 if report.all_proved else 1


def unproved_ids(report: smt.Report) -> set:
    return {r.vc.id for r in report.unproved()}


# -- selection sort ------------------------------------------------------------

def test_selection_sort_fully_verified():
    c = checked("selection_sort.ibp")
    assert exit_code(c.report) == 0, unproved_ids(c.report)
    assert {r.vc.kind for r in c.report.results} == {
        "consistency", "liveness", "termination", "safety"}
    assert c.wall < 120


def test_selection_sort_swapped_updates_fail_in_inner_loop():
    # r := r + 1 before m := r makes the new minimum index point one past
    # the element that was actually compared; exactly the inner-loop
    # goals that depend on m fail, nothing else regresses
    c = checked("selection_sort_bug.ibp")
    assert exit_code(c.report) == 1
    assert unproved_ids(c.report) == {
        "selection_sort/Min/t2/goal#6/consistency",
        "selection_sort/Min/t2/goal#8/consistency",
    }


# -- siftdown ---------------------------------------------------------------------

def test_underconstrained_sift_exit_is_the_only_failure():
    c = checked("siftdown_bug.ibp")
    assert unproved_ids(c.report) == {"siftdown/Sift/t1/goal#0/consistency"}
    vc = c.report.unproved()[0].vc
    ants = [pretty(a) for a in vc.antecedents]
    assert len(ants) == 7
    assert ants[0] == "n <= r(k) or a[l(k)] <= a[k] and a[r(k)] <= a[k]"
    assert ants[1] == (ants[0] + " or r(k) < n and "
                       "(a[k] < a[l(k)] or a[k] < a[r(k)])")
    assert ants[2] == "perm(a, a_0)"
    assert ants[3] == "m <= k and k <= n and n <= len(a)"
    assert ants[4] == "eql(a, a_0, 0, m)"
    assert ants[5] == "eql(a, a_0, n, len(a))"
    assert ants[6].startswith("forall (i: nat): m <= i =>")
    assert pretty(vc.consequent) == "heap(a, m, n)"


def test_strengthened_exit_trades_consistency_for_liveness():
    # tightening the first exit disjunct to n < r(k) proves the heap goal
    # but leaves the boundary case r(k) = n with no enabled transition
    c = checked("siftdown_strengthened.ibp")
    verdicts = {r.vc.id: r.verdict for r in c.report.results}
    assert verdicts["siftdown/Sift/t1/goal#0/consistency"].proved
    assert not verdicts["siftdown/Sift/live/goal#0/liveness"].proved


def test_corrected_siftdown_fully_verified():
    c = checked("siftdown_fixed.ibp")
    assert exit_code(c.report) == 0, unproved_ids(c.report)
    assert tuple(c.ctx.strategy_lemmas) == (
        "perm_len", "perm_ref", "perm_sym", "perm_trs",
        "swap_acc", "swap_perm")
    assert c.wall < 300


# -- heapsort ----------------------------------------------------------------------

def test_heapsort_without_asserts_fails_only_partitioned_goal():
    c = checked("heapsort_no_asserts.ibp")
    assert unproved_ids(c.report) == {
        "heapsort/TearHeap/t3/goal#5/consistency"}
    vc = c.report.unproved()[0].vc
    assert pretty(vc.consequent) == "partitioned(a_1, k - 1)"


def test_heapsort_with_asserts_fully_verified():
    c = checked("heapsort_final.ibp")
    assert exit_code(c.report) == 0, unproved_ids(c.report)
    assert {"heap_max", "perm_partitioned"} <= set(c.ctx.strategy_lemmas)
    results = {r.vc.id: r for r in c.report.results}
    # the two recorded facts on the tear-down transition ...
    for vc_id in ("heapsort/TearHeap/t3/goal#0/consistency",
                  "heapsort/TearHeap/t3/goal#1/consistency"):
        assert results[vc_id].vc.description == "assert holds"
        assert results[vc_id].verdict.proved
    # ... carry the goal that fails without them
    part = [r for r in c.report.results
            if pretty(r.vc.consequent) == "partitioned(a_1, k - 1)"]
    assert part and all(r.verdict.proved for r in part)
    assert c.wall < 300


# -- staged development --------------------------------------------------------------

def test_skeleton_consistency_holds_while_liveness_warns():
    c = checked("heapsort_skeleton.ibp")
    assert exit_code(c.report) == 0, unproved_ids(c.report)
    warning_codes = {d.code for d in c.diags if d.severity == "warning"}
    assert "LIVE001" in warning_codes      # situations without a way out
    assert "LIVE002" in warning_codes      # postcondition not reachable yet
    # the one placed transition carries real proof obligations
    assert any(r.vc.id.startswith("heapsort/Pre/t0/")
               and r.vc.kind == "consistency" for r in c.report.results)


def test_acyclic_stage_fails_only_liveness():
    # with the loop bodies stubbed to straight-through steps, every
    # consistency goal still proves; only the two loop situations cannot
    # show an enabled transition
    c = checked("heapsort_acyclic.ibp")
    assert unproved_ids(c.report) == {
        "heapsort/BuildHeap/live/goal#0/liveness",
        "heapsort/TearHeap/live/goal#0/liveness",
    }


# -- lemma soundness audit -------------------------------------------------------------

def test_shipped_lemmas_sound_on_small_models():
    t0 = time.monotonic()
    results = lemma_soundness_suite(max_len=4, lo=-2, hi=2)
    wall = time.monotonic() - t0
    assert {r.lemma for r in results} == {
        "perm_ref", "perm_sym", "perm_trs", "perm_len",
        "swap_acc", "swap_perm", "heap_max", "perm_partitioned"}
    for r in results:
        assert r.ok, (r.lemma, r.counterexample)
        assert r.checked > 0
    assert wall < 60


# -- runtime oracle ----------------------------------------------------------------------

def test_heapsort_runtime_oracle_thousand_runs():
    # randomized end-to-end executions with invariant, guard, assert and
    # variant monitoring live; any violation raises and fails the test
    ctx, theory, _ = load_only("heapsort_final.ibp")
    rng = random.Random(20260815)
    t0 = time.monotonic()
    for i in range(1000):
        a = [rng.randint(-50, 50) for _ in range(rng.randint(0, 12))]
        res = interp.run(ctx, "heapsort", {"a": a}, theory=theory,
                         policy="random", seed=i)
        assert list(res.outputs["a"]) == sorted(a)
        assert res.final_situation == "Done"
    assert time.monotonic() - t0 < 30


# -- wp property suite --------------------------------------------------------------------

POOL = ("x", "y", "i")
WP_DECLS = tuple((n, M.SemType.INT) for n in ("x", "y", "i", "xp"))


def _int_expr(r, pool, depth):
    if depth == 0 or r.random() < 0.35:
        if r.random() < 0.7:
            return M.Var(r.choice(pool))
        return M.IntLit(r.randint(-3, 3))
    op = r.choice(("+", "-", "*"))
    left = _int_expr(r, pool, depth - 1)
    right = _int_expr(r, pool, depth - 1)
    if op == "*":
        right = M.IntLit(r.randint(-3, 3))     # stay linear
    return M.BinOp(op, left, right)


def _bool_expr(r, pool, depth):
    roll = r.random()
    if depth == 0 or roll < 0.45:
        op = r.choice(("<", "<=", "=", "/=", ">=", ">"))
        return M.BinOp(op, _int_expr(r, pool, 2), _int_expr(r, pool, 2))
    if roll < 0.55:
        return M.UnaryOp("not", _bool_expr(r, pool, depth - 1))
    op = r.choice(("and", "or", "=>"))
    return M.BinOp(op, _bool_expr(r, pool, depth - 1),
                   _bool_expr(r, pool, depth - 1))


def _statements(r, pool):
    out = []
    for _ in range(r.randint(1, 3)):
        roll = r.random()
        if roll < 0.5:
            out.append(M.Assign(r.choice(("x", "y")), _int_expr(r, pool, 2)))
        elif roll < 0.75:
            out.append(M.Guard(_bool_expr(r, pool, 1)))
        else:
            out.append(M.Assert(_bool_expr(r, pool, 1)))
    return tuple(out)


def _batched_validity(sequents):
    verdicts = []
    for i in range(0, len(sequents), 100):
        verdicts.extend(smt.check_validity_batch(
            sequents[i:i + 100], config=CONFIG))
    return verdicts


def test_wp_distributes_over_conjunction():
    # wp(S, P and Q) <=> wp(S, P) and wp(S, Q), checked semantically on
    # 200 random statement lists against random postcondition pairs
    sequents = []
    for k in range(200):
        r = random.Random(f"conj{k}")
        s = _statements(r, POOL)
        p, q = _bool_expr(r, POOL, 2), _bool_expr(r, POOL, 2)
        both = vcgen.wp(s, M.BinOp("and", p, q))
        split = M.BinOp("and", vcgen.wp(s, p), vcgen.wp(s, q))
        sequents.append(((), M.BinOp("<=>", both, split), WP_DECLS))
    verdicts = _batched_validity(sequents)
    bad = [k for k, v in enumerate(verdicts) if not v.proved]
    assert not bad, bad


def test_wp_of_assignment_is_substitution():
    # the engine's wp(x := e, R) must agree with R rebuilt around the
    # value of e: for xp = e, wp(x := e, R{x}) <=> R{xp}.  R{xp} is
    # generated from the same random stream with xp in place of x, an
    # oracle independent of the substitution machinery under test.
    sequents = []
    for k in range(200):
        value = _int_expr(random.Random(f"val{k}"), POOL, 2)
        post_x = _bool_expr(random.Random(f"post{k}"), ("x", "y", "i"), 2)
        post_p = _bool_expr(random.Random(f"post{k}"), ("xp", "y", "i"), 2)
        lhs = vcgen.wp((M.Assign("x", value),), post_x)
        goal = M.BinOp("=>", M.BinOp("=", M.Var("xp"), value),
                       M.BinOp("<=>", lhs, post_p))
        sequents.append(((), goal, WP_DECLS))
    verdicts = _batched_validity(sequents)
    bad = [k for k, v in enumerate(verdicts) if not v.proved]
    assert not bad, bad


# -- countermodel sweep ----------------------------------------------------------------------

def test_no_countermodels_for_proved_goals():
    # every goal the solver accepted is re-attacked by exhaustive
    # finite evaluation over all vectors up to length 4
    seen = set()
    hits = []
    audited = 0
    for name in PROGRAMS:
        c = checked(name)
        todo = []
        for r in c.report.results:
            if not r.verdict.proved:
                continue
            key = (r.vc.antecedents, r.vc.consequent, r.vc.declarations)
            if key in seen:
                continue
            seen.add(key)
            todo.append(r.vc)
        audited += len(todo)
        hits.extend(interp.vc_countermodels(todo, c.theory, max_len=4))
    assert audited > 200
    assert not hits, [(vc.id, env) for vc, env in hits]
