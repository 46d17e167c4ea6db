"""Concrete execution of invariant diagrams.

The interpreter runs a procedure on actual values, checking every
situation invariant on arrival, every variant for decrease, every assert
and callee precondition -- so a diagram that verifies should never raise,
and a buggy one usually raises quickly on random inputs.

Quantifiers range over unbounded naturals, which a runtime check cannot
enumerate.  Invariants in practice are eventually constant in the bound
variable (`i < len(a) => ...` is vacuous for large `i`), so the evaluator
derives, per quantifier, a bound beyond which the body's truth value is
fixed, by linear analysis of the comparisons the variable occurs in; only
the prefix below the bound is enumerated.  Expressions where no such
bound exists raise `EvalError` rather than guess.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import model as M
from .analysis import scc_by_situation
from .prelude import DomainError, TheoryEnv, builtin_theory

__all__ = [
    "EvalError", "Violation", "PreconditionViolation", "InvariantViolation",
    "LivenessViolation", "AssertViolation", "VariantViolation",
    "StepLimitExceeded", "eval_expr", "run", "RunResult",
    "search_countermodel", "vc_countermodels",
]

Value = object  # int | bool | tuple


class EvalError(Exception):
    """The expression has no defined value (bad index, division by zero,
    uninterpreted function, unboundable quantifier...)."""


class Violation(Exception):
    """A runtime check failed; the diagram does not hold on this input."""

    def __init__(self, message: str, *, procedure: str = "",
                 situation: str = "", transition: str = ""):
        super().__init__(message)
        self.procedure = procedure
        self.situation = situation
        self.transition = transition


class PreconditionViolation(Violation):
    pass


class InvariantViolation(Violation):
    pass


class LivenessViolation(Violation):
    pass


class AssertViolation(Violation):
    pass


class VariantViolation(Violation):
    pass


class StepLimitExceeded(Violation):
    pass


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

_CMP = {
    "<": lambda d: d < 0, "<=": lambda d: d <= 0,
    ">": lambda d: d > 0, ">=": lambda d: d >= 0,
    "=": lambda d: d == 0, "/=": lambda d: d != 0,
}

_ENUM_CAP = 1_000_000


class _Evaluator:
    def __init__(self, state: dict, theory: TheoryEnv,
                 nat_bound: Optional[int]):
        self.state = state
        self.theory = theory
        self.nat_bound = nat_bound

    def eval(self, e: M.Expr) -> Value:
        if isinstance(e, M.IntLit):
            return e.value
        if isinstance(e, M.BoolLit):
            return e.value
        if isinstance(e, M.Var):
            try:
                return self.state[e.name]
            except KeyError:
                raise EvalError(f"unbound variable {e.name!r}") from None
        if isinstance(e, M.OldVar):
            key = f"{e.name}_0"
            try:
                return self.state[key]
            except KeyError:
                raise EvalError(f"no entry value recorded for {e.name!r}") \
                    from None
        if isinstance(e, M.UnaryOp):
            if e.op == "not":
                return not self.eval(e.operand)
            return -self.eval(e.operand)
        if isinstance(e, M.BinOp):
            return self.eval_binop(e)
        if isinstance(e, M.Ite):
            return self.eval(e.then if self.eval(e.cond) else e.other)
        if isinstance(e, M.ArrLen):
            return len(self.eval(e.vec))
        if isinstance(e, M.ArrGet):
            vec, i = self.eval(e.vec), self.eval(e.index)
            if not 0 <= i < len(vec):
                raise EvalError(f"index {i} out of range for length {len(vec)}")
            return vec[i]
        if isinstance(e, M.ArrSet):
            vec, i = self.eval(e.vec), self.eval(e.index)
            if not 0 <= i < len(vec):
                raise EvalError(f"index {i} out of range for length {len(vec)}")
            v = self.eval(e.value)
            return vec[:i] + (v,) + vec[i + 1:]
        if isinstance(e, M.App):
            return self.eval_app(e)
        if isinstance(e, M.Quant):
            return self.eval_quant(e)
        raise TypeError(f"unexpected node {e!r}")

    def eval_binop(self, e: M.BinOp) -> Value:
        op = e.op
        if op == "and":
            return bool(self.eval(e.left)) and bool(self.eval(e.right))
        if op == "or":
            return bool(self.eval(e.left)) or bool(self.eval(e.right))
        if op == "=>":
            return (not self.eval(e.left)) or bool(self.eval(e.right))
        if op == "<=>":
            return bool(self.eval(e.left)) == bool(self.eval(e.right))
        x = self.eval(e.left)
        y = self.eval(e.right)
        if op == "=":
            return x == y
        if op == "/=":
            return x != y
        if op == "<":
            return x < y
        if op == "<=":
            return x <= y
        if op == ">":
            return x > y
        if op == ">=":
            return x >= y
        if op == "+":
            return x + y
        if op == "-":
            return x - y
        if op == "*":
            return x * y
        if op == "div":
            if y == 0:
                raise EvalError("division by zero")
            if y > 0:
                return x // y
            return (-x) // (-y)
        raise TypeError(f"unexpected operator {op!r}")

    def eval_app(self, e: M.App) -> Value:
        fd = self.theory.resolve(e.func, len(e.args))
        if fd is None:
            raise EvalError(f"unknown function {e.func}/{len(e.args)}")
        args = [self.eval(a) for a in e.args]
        if fd.native is not None:
            try:
                return fd.native(*args)
            except DomainError as exc:
                raise EvalError(str(exc)) from None
        if fd.body is None:
            raise EvalError(f"{e.func} is uninterpreted; no value to compute")
        frame = {p.name: v for p, v in zip(fd.params, args)}
        sub = _Evaluator(frame, self.theory, self.nat_bound)
        for d in fd.domain:
            if not sub.eval(d):
                raise EvalError(f"argument outside the domain of {e.func}")
        return sub.eval(fd.body)

    def eval_int(self, e: M.Expr) -> int:
        v = self.eval(e)
        if isinstance(v, bool) or not isinstance(v, int):
            raise EvalError("expected an integer value")
        return v

    # -- quantifiers ----------------------------------------------------------

    def eval_quant(self, e: M.Quant) -> bool:
        if e.var_type is M.SemType.BOOL:
            domain = [False, True]
            return self._check(e, domain)
        if self.nat_bound is not None:
            if e.var_type is M.SemType.NAT:
                return self._check(e, range(0, self.nat_bound + 1))
            if e.var_type is M.SemType.INT:
                return self._check(e, range(-self.nat_bound,
                                            self.nat_bound + 1))
            raise EvalError("cannot enumerate vector-valued quantifiers")
        if e.var_type is not M.SemType.NAT:
            raise EvalError(
                f"cannot evaluate a quantifier over {e.var_type.value}")
        t_fn, f_fn = _quant_bounds(e, self.theory)
        forall = e.kind == "forall"
        bound = t_fn(self) if forall else f_fn(self)
        if bound is not None:
            if bound > _ENUM_CAP:
                raise EvalError("quantifier bound too large to enumerate")
            return self._check(e, range(0, max(bound, 0)))
        other = f_fn(self) if forall else t_fn(self)
        if other is not None:
            # beyond `other` the body is constantly losing for this kind
            return not forall
        raise EvalError("cannot bound quantified variable "
                        f"{e.var!r}; the body is not eventually constant")

    def _check(self, e: M.Quant, domain) -> bool:
        saved = self.state.get(e.var, _MISSING)
        try:
            if e.kind == "forall":
                for v in domain:
                    self.state[e.var] = v
                    if not self.eval(e.body):
                        return False
                return True
            for v in domain:
                self.state[e.var] = v
                if self.eval(e.body):
                    return True
            return False
        finally:
            if saved is _MISSING:
                self.state.pop(e.var, None)
            else:
                self.state[e.var] = saved


_MISSING = object()


def eval_expr(e: M.Expr, state: dict, theory: Optional[TheoryEnv] = None,
              *, nat_bound: Optional[int] = None) -> Value:
    """Evaluate `e` in `state` (names to int/bool/tuple values)."""
    return _Evaluator(state, theory or builtin_theory(), nat_bound).eval(e)


# ---------------------------------------------------------------------------
# Eventual-truth bounds for nat quantifiers
# ---------------------------------------------------------------------------

BoundFn = Callable[[_Evaluator], Optional[int]]

_BOUND_CACHE: dict[int, tuple[M.Quant, BoundFn, BoundFn]] = {}


def _quant_bounds(q: M.Quant, theory: TheoryEnv) -> tuple[BoundFn, BoundFn]:
    hit = _BOUND_CACHE.get(id(q))
    if hit is not None and hit[0] is q:
        return hit[1], hit[2]
    t_fn, f_fn = _analyze(q.body, q.var, theory)
    _BOUND_CACHE[id(q)] = (q, t_fn, f_fn)
    return t_fn, f_fn


def _const_int(e: M.Expr) -> Optional[int]:
    if isinstance(e, M.IntLit):
        return e.value
    if isinstance(e, M.UnaryOp) and e.op == "-":
        v = _const_int(e.operand)
        return None if v is None else -v
    if isinstance(e, M.BinOp) and e.op in ("+", "-", "*"):
        a, b = _const_int(e.left), _const_int(e.right)
        if a is None or b is None:
            return None
        return a + b if e.op == "+" else a - b if e.op == "-" else a * b
    return None


def _linear(e: M.Expr, v: str, theory: TheoryEnv):
    """Decompose `e` as slope*v + intercept with a constant integer slope
    and a v-free intercept expression; None when not of that shape."""
    if v not in M.free_vars(e):
        return 0, e
    if isinstance(e, M.Var):
        return (1, M.IntLit(0)) if e.name == v else (0, e)
    if isinstance(e, M.UnaryOp) and e.op == "-":
        lin = _linear(e.operand, v, theory)
        if lin is None:
            return None
        return -lin[0], M.UnaryOp("-", lin[1])
    if isinstance(e, M.BinOp) and e.op in ("+", "-"):
        la = _linear(e.left, v, theory)
        lb = _linear(e.right, v, theory)
        if la is None or lb is None:
            return None
        if e.op == "+":
            return la[0] + lb[0], M.BinOp("+", la[1], lb[1])
        return la[0] - lb[0], M.BinOp("-", la[1], lb[1])
    if isinstance(e, M.BinOp) and e.op == "*":
        la = _linear(e.left, v, theory)
        lb = _linear(e.right, v, theory)
        if la is None or lb is None:
            return None
        if la[0] == 0:
            k = _const_int(e.left)
            if k is None:
                return None
            return k * lb[0], M.BinOp("*", e.left, lb[1])
        if lb[0] == 0:
            k = _const_int(e.right)
            if k is None:
                return None
            return la[0] * k, M.BinOp("*", la[1], e.right)
        return None
    if isinstance(e, M.App):
        fd = theory.resolve(e.func, len(e.args))
        if fd is not None and fd.transparent:
            body = M.substitute(fd.body,
                                {p.name: a for p, a in
                                 zip(fd.params, e.args)})
            return _linear(body, v, theory)
        return None
    return None


def _never(ev: _Evaluator) -> Optional[int]:
    return None


def _analyze(e: M.Expr, v: str, theory: TheoryEnv) -> tuple[BoundFn, BoundFn]:
    """Closures computing, for a given state, a bound beyond which the
    formula is constantly true (resp. false) in `v`; None when unknown."""
    if v not in M.free_vars(e):
        def t_fn(ev, _e=e):
            try:
                return 0 if ev.eval(_e) is True else None
            except EvalError:
                return None

        def f_fn(ev, _e=e):
            try:
                return 0 if ev.eval(_e) is False else None
            except EvalError:
                return None
        return t_fn, f_fn

    if isinstance(e, M.UnaryOp) and e.op == "not":
        t, f = _analyze(e.operand, v, theory)
        return f, t

    if isinstance(e, M.BinOp) and e.op in M.CONNECTIVES:
        if e.op == "<=>":
            fwd = M.BinOp("=>", e.left, e.right)
            bwd = M.BinOp("=>", e.right, e.left)
            return _analyze(M.BinOp("and", fwd, bwd), v, theory)
        ta, fa = _analyze(e.left, v, theory)
        tb, fb = _analyze(e.right, v, theory)
        if e.op == "=>":
            ta, fa = fa, ta  # A => B behaves as (not A) or B
            e = M.BinOp("or", e.left, e.right)
        if e.op == "and":
            def t_fn(ev):
                x, y = ta(ev), tb(ev)
                return max(x, y) if x is not None and y is not None else None

            def f_fn(ev):
                cands = [b for b in (fa(ev), fb(ev)) if b is not None]
                return min(cands) if cands else None
            return t_fn, f_fn

        def t_fn(ev):
            cands = [b for b in (ta(ev), tb(ev)) if b is not None]
            return min(cands) if cands else None

        def f_fn(ev):
            x, y = fa(ev), fb(ev)
            return max(x, y) if x is not None and y is not None else None
        return t_fn, f_fn

    if isinstance(e, M.BinOp) and e.op in M.COMPARISONS:
        ll = _linear(e.left, v, theory)
        lr = _linear(e.right, v, theory)
        if ll is not None and lr is not None:
            slope = ll[0] - lr[0]
            intercept = M.BinOp("-", ll[1], lr[1])
            cmp_fn = _CMP[e.op]
            if slope == 0:
                def t_fn(ev):
                    try:
                        return 0 if cmp_fn(ev.eval_int(intercept)) else None
                    except EvalError:
                        return None

                def f_fn(ev):
                    try:
                        return None if cmp_fn(ev.eval_int(intercept)) else 0
                    except EvalError:
                        return None
                return t_fn, f_fn
            eventually = cmp_fn(slope)  # sign of L-R for large v

            def bound(ev):
                try:
                    c = ev.eval_int(intercept)
                except EvalError:
                    return None
                return abs(c) // abs(slope) + 1
            if eventually:
                return bound, _never
            return _never, bound

    if isinstance(e, M.App):
        fd = theory.resolve(e.func, len(e.args))
        if fd is not None and fd.transparent:
            body = M.substitute(fd.body,
                                {p.name: a for p, a in
                                 zip(fd.params, e.args)})
            return _analyze(body, v, theory)

    return _never, _never


# ---------------------------------------------------------------------------
# Running procedures
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    procedure: str
    outputs: dict
    steps: int
    final_situation: str
    state: dict
    trace: list = field(default_factory=list)

    def trace_text(self) -> str:
        lines = []
        for entry in self.trace:
            via = f" via {entry['via']}" if entry.get("via") else ""
            lines.append(f"{entry['proc']}: {entry['situation']}{via}")
        return "\n".join(lines)

    def trace_json(self) -> str:
        def clean(v):
            return list(v) if isinstance(v, tuple) else v
        out = []
        for entry in self.trace:
            row = dict(entry)
            if "state" in row:
                row["state"] = {k: clean(x) for k, x in row["state"].items()}
            out.append(row)
        return json.dumps(out, indent=2)


def _default(ty: M.SemType) -> Value:
    if ty is M.SemType.BOOL:
        return False
    if ty is M.SemType.VEC:
        return ()
    return 0


def _to_value(x) -> Value:
    if isinstance(x, list):
        return tuple(x)
    return x


def run(ctx: M.VerificationContext, proc_name: str, inputs: dict, *,
        theory: Optional[TheoryEnv] = None, policy: str = "first",
        seed: Optional[int] = None, max_steps: int = 1_000_000,
        trace: bool = False) -> RunResult:
    """Execute `proc_name` on `inputs` (name -> value), checking
    invariants, variants, asserts, and callee preconditions throughout.

    `policy` picks among simultaneously enabled transitions: "first"
    takes the first in declaration order, "random" shuffles (seeded).
    `max_steps` bounds situation arrivals across all nested calls.
    """
    if policy not in ("first", "random"):
        raise ValueError(f"unknown policy {policy!r}")
    theory = theory or builtin_theory()
    rng = random.Random(seed)
    budget = [max_steps]
    trace_log: list = []

    proc = ctx.procedure(proc_name)
    state: dict = {}
    for c in ctx.constants:
        if c.name not in inputs:
            raise ValueError(f"no value supplied for constant {c.name!r}")
        state[c.name] = _to_value(inputs[c.name])
    for p in proc.params:
        if p.name not in inputs:
            raise ValueError(f"no value supplied for parameter {p.name!r}")
        state[p.name] = _to_value(inputs[p.name])

    final_sit = _run_proc(ctx, proc, state, theory, policy, rng, budget,
                          trace_log if trace else None)
    outputs = {p.name: state[p.name] for p in proc.valres_params()}
    return RunResult(
        procedure=proc_name, outputs=outputs, steps=max_steps - budget[0],
        final_situation=final_sit, state=state, trace=trace_log)


def _run_proc(ctx, proc: M.Procedure, state: dict, theory, policy, rng,
              budget, trace_log) -> str:
    """Drive `proc` from its precondition to a postcondition; `state`
    already holds parameter values and is updated in place."""
    for p in proc.valres_params():
        state[f"{p.name}_0"] = state[p.name]
    for v in proc.locals:
        state[v.name] = _default(v.type)
    if proc.recursion_variant is not None:
        rv = eval_expr(proc.recursion_variant, state, theory)
        if rv < 0:
            raise VariantViolation(
                f"recursion variant of {proc.name} is negative ({rv})",
                procedure=proc.name)

    sccs = scc_by_situation(proc)
    current_scc = None
    last_variant: Optional[int] = None

    def arrive(sit: M.Situation, via: Optional[str]) -> None:
        nonlocal current_scc, last_variant
        if budget[0] <= 0:
            raise StepLimitExceeded("step limit exceeded",
                                    procedure=proc.name, situation=sit.name)
        budget[0] -= 1
        if trace_log is not None:
            entry = {"proc": proc.name, "situation": sit.name}
            if via:
                entry["via"] = via
            entry["state"] = dict(state)
            trace_log.append(entry)
        for inv in M.effective_invariant_exprs(sit):
            try:
                ok = eval_expr(inv, state, theory)
            except EvalError as exc:
                raise EvalError(
                    f"evaluating invariant of {sit.name}: {exc}") from None
            if not ok:
                cls = (PreconditionViolation
                       if sit.kind is M.SituationKind.PRECONDITION
                       else InvariantViolation)
                raise cls(
                    f"invariant of {proc.name}/{sit.name} does not hold",
                    procedure=proc.name, situation=sit.name,
                    transition=via or "")
        scc = sccs.get(sit.name)
        if scc is not None and scc.cyclic and scc.variant is not None:
            value = eval_expr(scc.variant, state, theory)
            if value < 0:
                raise VariantViolation(
                    f"variant of {proc.name}/{sit.name} is negative "
                    f"({value})", procedure=proc.name, situation=sit.name)
            if current_scc is scc and value >= last_variant:
                raise VariantViolation(
                    f"variant of {proc.name}/{sit.name} did not decrease "
                    f"({last_variant} -> {value})",
                    procedure=proc.name, situation=sit.name,
                    transition=via or "")
            current_scc, last_variant = scc, value
        else:
            current_scc, last_variant = None, None

    def attempt(t: M.Transition) -> bool:
        """Run one transition against `state`; False means its guard
        rejected before any state change and another may be tried."""
        changed = False
        for stmt in t.body:
            if isinstance(stmt, M.Guard):
                if not eval_expr(stmt.cond, state, theory):
                    if changed:
                        raise LivenessViolation(
                            f"guard failed after a state change in "
                            f"{proc.name}/{t.label}", procedure=proc.name,
                            situation=t.source, transition=t.label)
                    return False
            elif isinstance(stmt, M.Assert):
                if not eval_expr(stmt.cond, state, theory):
                    raise AssertViolation(
                        f"assert failed in {proc.name}/{t.label}",
                        procedure=proc.name, situation=t.source,
                        transition=t.label)
            elif isinstance(stmt, M.Assign):
                value = eval_expr(stmt.value, state, theory)
                ty = proc.variable_type(stmt.target)
                if ty is M.SemType.NAT and value < 0:
                    raise EvalError(
                        f"negative value {value} assigned to nat "
                        f"{stmt.target!r}")
                state[stmt.target] = value
                changed = True
            elif isinstance(stmt, M.Call):
                callee = ctx.procedure(stmt.proc)
                frame: dict = {c.name: state[c.name] for c in ctx.constants}
                for p, arg in zip(callee.params, stmt.args):
                    frame[p.name] = eval_expr(arg, state, theory)
                _run_proc(ctx, callee, frame, theory, policy, rng, budget,
                          trace_log)
                for p, arg in zip(callee.params, stmt.args):
                    if p.valres:
                        state[arg.name] = frame[p.name]
                changed = True
        return True

    situation = proc.precondition
    arrive(situation, None)
    while situation.kind is not M.SituationKind.POSTCONDITION:
        candidates = list(proc.outgoing(situation.name))
        if policy == "random":
            rng.shuffle(candidates)
        for t in candidates:
            snapshot = dict(state)
            if attempt(t):
                situation = proc.situation(t.target)
                arrive(situation, t.label)
                break
            state.clear()
            state.update(snapshot)
        else:
            raise LivenessViolation(
                f"no transition enabled at {proc.name}/{situation.name}",
                procedure=proc.name, situation=situation.name)
    return situation.name


# ---------------------------------------------------------------------------
# Countermodel search for (supposedly valid) obligations
# ---------------------------------------------------------------------------

def _perm_clusters(vcs_ants, vec_names: list[str]) -> list[set[str]]:
    """Group vector names linked by perm(...) atoms so samples respect
    the permutation antecedents instead of failing them all."""
    parent = {n: n for n in vec_names}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in vcs_ants:
        for node in M.walk(e):
            if (isinstance(node, M.App) and node.func == "perm"
                    and len(node.args) == 2):
                a, b = node.args
                names = []
                for side in (a, b):
                    if isinstance(side, M.Var):
                        names.append(side.name)
                    elif isinstance(side, M.OldVar):
                        names.append(f"{side.name}_0")
                if len(names) == 2 and all(n in parent for n in names):
                    parent[find(names[0])] = find(names[1])
    clusters: dict[str, set[str]] = {}
    for n in vec_names:
        clusters.setdefault(find(n), set()).add(n)
    return list(clusters.values())


def _corner_states(decls, clusters, *, max_len: int, lo: int, hi: int):
    """Deterministic boundary states: short ramp/constant vectors with a
    few arrangements per perm-cluster, and length-relative corner values
    for the scalars.  These hit the thin regions (empty prefixes, k at
    either end) random sampling almost never lands in."""
    scalars = [(n, ty) for n, ty in decls.items() if ty is not M.SemType.VEC]
    linked = any(len(c) > 1 for c in clusters)
    for length in range(max_len + 1):
        ramp = tuple(lo + i for i in range(length))
        bases = []
        for b in (ramp, ramp[::-1], (0,) * length,
                  ramp[1:2] + ramp[:1] + ramp[2:]):
            if b not in bases:
                bases.append(b)
        for base in bases:
            for flip in (False, True) if linked and base != base[::-1] else (False,):
                env0 = {}
                for cluster in clusters:
                    for idx, name in enumerate(sorted(cluster)):
                        env0[name] = base[::-1] if flip and idx else base
                axes = []
                for name, ty in scalars:
                    if ty is M.SemType.NAT:
                        vals = sorted({0, 1, max(length - 1, 0), length,
                                       length + 1})
                    elif ty is M.SemType.INT:
                        vals = sorted({lo, 0, hi})
                    else:
                        vals = [False, True]
                    axes.append([(name, v) for v in vals])
                for combo in itertools.product(*axes):
                    env = dict(env0)
                    env.update(combo)
                    yield env


def search_countermodel(vc, theory: Optional[TheoryEnv] = None, *,
                        max_len: int = 4, lo: int = -2, hi: int = 2,
                        samples: int = 200, seed: int = 0) -> Optional[dict]:
    """Look for a state where every antecedent holds and the consequent
    fails.  Enumerates boundary states first, then random samples; misses
    are possible, but any hit is a real countermodel."""
    theory = theory or builtin_theory()
    rng = random.Random(f"{seed}/{vc.id}")
    decls = dict(vc.declarations)
    vec_names = [n for n, ty in decls.items() if ty is M.SemType.VEC]
    clusters = _perm_clusters(vc.antecedents, vec_names)
    nat_bound = max_len + 3

    def hit(env) -> bool:
        try:
            if not all(eval_expr(a, dict(env), theory, nat_bound=nat_bound)
                       for a in vc.antecedents):
                return False
            return not eval_expr(vc.consequent, dict(env), theory,
                                 nat_bound=nat_bound)
        except EvalError:
            return False

    for env in itertools.islice(
            _corner_states(decls, clusters, max_len=max_len, lo=lo, hi=hi),
            20_000):
        if hit(env):
            return env

    for _ in range(samples):
        env: dict = {}
        for cluster in clusters:
            base = tuple(rng.randint(lo, hi)
                         for _ in range(rng.randint(0, max_len)))
            for name in cluster:
                env[name] = tuple(rng.sample(base, len(base)))
        for name, ty in decls.items():
            if ty is M.SemType.VEC:
                continue
            if ty is M.SemType.NAT:
                env[name] = rng.randint(0, max_len + 2)
            elif ty is M.SemType.INT:
                env[name] = rng.randint(lo, hi)
            else:
                env[name] = rng.random() < 0.5
        if hit(env):
            return env
    return None


def vc_countermodels(vcs, theory: Optional[TheoryEnv] = None, *,
                     max_len: int = 4, lo: int = -2, hi: int = 2,
                     samples: int = 200, seed: int = 0) -> list:
    """Countermodel search over many obligations; returns (vc, env) pairs."""
    out = []
    for vc in vcs:
        env = search_countermodel(vc, theory, max_len=max_len, lo=lo, hi=hi,
                                  samples=samples, seed=seed)
        if env is not None:
            out.append((vc, env))
    return out
