"""Static analysis: types, reachability, cycles, guard placement.

All checks return diagnostics rather than raising; `analyze` runs the
whole battery in a deterministic order.  Error codes:

  TYPE001  unknown name              TYPE002  type mismatch
  TYPE003  invalid use of a name (entry values, read-only parameters)
  LIVE001  situation is not live     LIVE002  situation unreachable
  LIVE003  guard after a state change (treated as an assumption)
  TERM001  cyclic situations without a (unique) variant
  TERM002  variant outside any cycle
  TERM003  recursive procedures without a recursion variant
  TERM004  recursion variant on a non-recursive procedure
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from . import model as M
from .prelude import TheoryEnv, builtin_theory, resolve_strategy
from .source import Diagnostic

__all__ = [
    "type_of", "typecheck", "reachability_check", "SccInfo",
    "scc_decompose", "scc_by_situation", "termination_check",
    "call_graph_sccs", "recursion_check", "miracle_scan", "analyze",
]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class _TypeFailure(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


def _numeric(t: M.SemType) -> bool:
    return t in (M.SemType.INT, M.SemType.NAT)


def _join_numeric(a: M.SemType, b: M.SemType) -> M.SemType:
    if a is M.SemType.NAT and b is M.SemType.NAT:
        return M.SemType.NAT
    return M.SemType.INT


class _Checker:
    def __init__(self, variables: Mapping[str, M.SemType],
                 theory: TheoryEnv, valres: frozenset[str]):
        self.variables = variables
        self.theory = theory
        self.valres = valres

    def fail(self, code: str, msg: str, span) -> "_TypeFailure":
        return _TypeFailure(Diagnostic("error", code, msg, span))

    def expect(self, e: M.Expr, ty: M.SemType,
               bound: Mapping[str, M.SemType]) -> None:
        got = self.check(e, bound)
        if ty is M.SemType.NAT or ty is M.SemType.INT:
            if not _numeric(got):
                raise self.fail("TYPE002", f"expected {ty}, got {got}", e.span)
        elif got is not ty:
            raise self.fail("TYPE002", f"expected {ty}, got {got}", e.span)

    def check(self, e: M.Expr, bound: Mapping[str, M.SemType]) -> M.SemType:
        ty = self._check(e, bound)
        e.set_type(ty)
        return ty

    def _check(self, e: M.Expr, bound) -> M.SemType:
        if isinstance(e, M.IntLit):
            return M.SemType.NAT if e.value >= 0 else M.SemType.INT
        if isinstance(e, M.BoolLit):
            return M.SemType.BOOL
        if isinstance(e, M.Var):
            if e.name in bound:
                return bound[e.name]
            t = self.variables.get(e.name)
            if t is None:
                raise self.fail("TYPE001", f"unknown variable {e.name!r}", e.span)
            return t
        if isinstance(e, M.OldVar):
            if e.name not in self.valres:
                raise self.fail(
                    "TYPE003",
                    f"{e.name}_0 requires {e.name!r} to be a valres parameter",
                    e.span)
            return self.variables[e.name]
        if isinstance(e, M.UnaryOp):
            if e.op == "not":
                self.expect(e.operand, M.SemType.BOOL, bound)
                return M.SemType.BOOL
            self.expect(e.operand, M.SemType.INT, bound)
            return M.SemType.INT
        if isinstance(e, M.BinOp):
            if e.op in M.ARITH_OPS:
                lt = self.check(e.left, bound)
                rt = self.check(e.right, bound)
                if not (_numeric(lt) and _numeric(rt)):
                    raise self.fail("TYPE002",
                                    f"operator {e.op!r} needs numeric operands,"
                                    f" got {lt} and {rt}", e.span)
                if e.op == "-":
                    return M.SemType.INT
                return _join_numeric(lt, rt)
            if e.op in M.COMPARISONS:
                lt = self.check(e.left, bound)
                rt = self.check(e.right, bound)
                if not (_numeric(lt) and _numeric(rt)):
                    raise self.fail("TYPE002",
                                    f"comparison {e.op!r} needs numeric operands,"
                                    f" got {lt} and {rt}", e.span)
                return M.SemType.BOOL
            # connective
            self.expect(e.left, M.SemType.BOOL, bound)
            self.expect(e.right, M.SemType.BOOL, bound)
            return M.SemType.BOOL
        if isinstance(e, M.Ite):
            self.expect(e.cond, M.SemType.BOOL, bound)
            lt = self.check(e.then, bound)
            rt = self.check(e.other, bound)
            if _numeric(lt) and _numeric(rt):
                return _join_numeric(lt, rt)
            if lt is not rt:
                raise self.fail("TYPE002",
                                f"if branches disagree: {lt} vs {rt}", e.span)
            return lt
        if isinstance(e, M.ArrLen):
            self.expect(e.vec, M.SemType.VEC, bound)
            return M.SemType.NAT
        if isinstance(e, M.ArrGet):
            self.expect(e.vec, M.SemType.VEC, bound)
            self.expect(e.index, M.SemType.INT, bound)
            return M.SemType.INT
        if isinstance(e, M.ArrSet):
            self.expect(e.vec, M.SemType.VEC, bound)
            self.expect(e.index, M.SemType.INT, bound)
            self.expect(e.value, M.SemType.INT, bound)
            return M.SemType.VEC
        if isinstance(e, M.App):
            fd = self.theory.resolve(e.func, len(e.args))
            if fd is None:
                arities = self.theory.arities(e.func)
                hint = (f" (defined with {', '.join(map(str, arities))} "
                        "argument(s))" if arities else "")
                raise self.fail("TYPE001",
                                f"unknown function {e.func}/{len(e.args)}{hint}",
                                e.span)
            for arg, p in zip(e.args, fd.params):
                self.expect(arg, p.type, bound)
            return fd.result
        if isinstance(e, M.Quant):
            inner = dict(bound)
            inner[e.var] = e.var_type
            self.expect(e.body, M.SemType.BOOL, inner)
            return M.SemType.BOOL
        raise self.fail("TYPE002", f"cannot type {type(e).__name__}", e.span)


def type_of(e: M.Expr, variables: Mapping[str, M.SemType],
            theory: Optional[TheoryEnv] = None,
            valres: frozenset[str] = frozenset()) -> M.SemType:
    """Type of a single expression; raises ValueError on ill-typed input."""
    checker = _Checker(variables, theory or builtin_theory(), valres)
    try:
        return checker.check(e, {})
    except _TypeFailure as f:
        raise ValueError(str(f.diag)) from None


def _proc_variables(ctx: M.VerificationContext,
                    proc: M.Procedure) -> dict[str, M.SemType]:
    table: dict[str, M.SemType] = {c.name: c.type for c in ctx.constants}
    for p in proc.params:
        table[p.name] = p.type
    for v in proc.locals:
        table[v.name] = v.type
    return table


def typecheck(ctx: M.VerificationContext,
              theory: Optional[TheoryEnv] = None) -> list[Diagnostic]:
    theory = theory or builtin_theory()
    diags: list[Diagnostic] = []

    def run(fn, *args):
        try:
            fn(*args)
        except _TypeFailure as f:
            diags.append(f.diag)

    for proc in ctx.procedures:
        variables = _proc_variables(ctx, proc)
        valres = frozenset(p.name for p in proc.valres_params())
        ck = _Checker(variables, theory, valres)
        value_params = {p.name for p in proc.params if not p.valres}

        for s in proc.all_situations():
            for inv in s.invariants:
                run(ck.expect, inv, M.SemType.BOOL, {})
            if s.variant is not None:
                run(ck.expect, s.variant, M.SemType.INT, {})
        if proc.recursion_variant is not None:
            run(ck.expect, proc.recursion_variant, M.SemType.INT, {})

        for t in proc.transitions:
            for stmt in t.body:
                if isinstance(stmt, (M.Guard, M.Assert)):
                    run(ck.expect, stmt.cond, M.SemType.BOOL, {})
                elif isinstance(stmt, M.Assign):
                    if stmt.target in value_params:
                        diags.append(Diagnostic(
                            "error", "TYPE003",
                            f"{proc.name}: parameter {stmt.target!r} is"
                            " read-only (declare it valres to modify it)",
                            stmt.span))
                        continue
                    target_ty = variables.get(stmt.target)
                    if target_ty is None:
                        continue  # undeclared: already a resolve error
                    run(ck.expect, stmt.value, target_ty, {})
                elif isinstance(stmt, M.Call):
                    try:
                        callee = ctx.procedure(stmt.proc)
                    except KeyError:
                        continue  # resolve error already reported
                    for arg, p in zip(stmt.args, callee.params):
                        run(ck.expect, arg, p.type, {})
                        if (p.valres and isinstance(arg, M.Var)
                                and arg.name in value_params):
                            diags.append(Diagnostic(
                                "error", "TYPE003",
                                f"{proc.name}: read-only parameter"
                                f" {arg.name!r} passed as valres argument",
                                stmt.span))
    return diags


# ---------------------------------------------------------------------------
# Reachability / liveness structure
# ---------------------------------------------------------------------------

def reachability_check(proc: M.Procedure) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    try:
        pre = proc.precondition
    except KeyError:
        return diags

    reached = {pre.name}
    frontier = [pre.name]
    while frontier:
        here = frontier.pop()
        for t in proc.outgoing(here):
            if t.target not in reached:
                reached.add(t.target)
                frontier.append(t.target)

    targeted = {t.target for t in proc.transitions}
    for s in proc.all_situations():
        # A situation with children is a grouping: control only rests there
        # when some transition targets it directly, and it counts as reached
        # whenever any descendant is.
        location = not s.children or s.name in targeted or s is pre
        if not any(d.name in reached for d in s.subtree()):
            diags.append(Diagnostic(
                "warning", "LIVE002",
                f"{proc.name}: situation {s.name!r} is unreachable from"
                f" {pre.name!r}", s.span))
        if (location and s.kind is not M.SituationKind.POSTCONDITION
                and not proc.outgoing(s.name)):
            diags.append(Diagnostic(
                "warning", "LIVE001",
                f"{proc.name}: situation {s.name!r} is not live"
                " (no outgoing transitions)", s.span))
    return diags


# ---------------------------------------------------------------------------
# Strongly connected components and variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SccInfo:
    members: frozenset[str]
    cyclic: bool
    variant: Optional[M.Expr] = None
    variant_owner: Optional[str] = None


def scc_decompose(proc: M.Procedure) -> list[SccInfo]:
    """Tarjan over the situation graph; components in reverse topological
    order of discovery, deterministic for a given procedure."""
    names = [s.name for s in proc.all_situations()]
    edges: dict[str, list[str]] = {n: [] for n in names}
    self_loop = set()
    for t in proc.transitions:
        if t.source in edges and t.target in edges:
            edges[t.source].append(t.target)
            if t.source == t.target:
                self_loop.add(t.source)

    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    out: list[list[str]] = []

    def strongconnect(v: str):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in edges[v]:
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(comp)

    for n in names:
        if n not in index:
            strongconnect(n)

    situations = {s.name: s for s in proc.all_situations()}
    infos = []
    for comp in out:
        cyclic = len(comp) > 1 or comp[0] in self_loop
        owners = [n for n in comp if situations[n].variant is not None]
        variant = situations[owners[0]].variant if owners else None
        infos.append(SccInfo(frozenset(comp), cyclic, variant,
                             owners[0] if owners else None))
    return infos


def scc_by_situation(proc: M.Procedure) -> dict[str, SccInfo]:
    return {name: info for info in scc_decompose(proc) for name in info.members}


def termination_check(proc: M.Procedure) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    situations = {s.name: s for s in proc.all_situations()}
    for info in scc_decompose(proc):
        owners = sorted(n for n in info.members
                        if situations[n].variant is not None)
        if info.cyclic and len(owners) != 1:
            show = ", ".join(sorted(info.members))
            diags.append(Diagnostic(
                "error", "TERM001",
                f"{proc.name}: cyclic situations {{{show}}} need exactly one"
                f" variant, found {len(owners)}",
                situations[min(info.members)].span))
        if not info.cyclic and owners:
            diags.append(Diagnostic(
                "warning", "TERM002",
                f"{proc.name}: variant on {owners[0]!r} is outside any cycle",
                situations[owners[0]].span))
    return diags


def call_graph_sccs(ctx: M.VerificationContext) -> list[frozenset[str]]:
    names = [p.name for p in ctx.procedures]
    edges = {n: [] for n in names}
    self_loop = set()
    for proc in ctx.procedures:
        for t in proc.transitions:
            for stmt in t.body:
                if isinstance(stmt, M.Call) and stmt.proc in edges:
                    edges[proc.name].append(stmt.proc)
                    if stmt.proc == proc.name:
                        self_loop.add(proc.name)

    # Tarjan again, over the procedure graph.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    comps: list[frozenset[str]] = []

    def strongconnect(v: str):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in edges[v]:
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            comps.append(frozenset(comp))

    for n in names:
        if n not in index:
            strongconnect(n)
    return [c for c in comps
            if len(c) > 1 or (len(c) == 1 and next(iter(c)) in self_loop)]


def recursion_check(ctx: M.VerificationContext) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    recursive = {name for comp in call_graph_sccs(ctx) for name in comp}
    for proc in ctx.procedures:
        if proc.name in recursive and proc.recursion_variant is None:
            diags.append(Diagnostic(
                "error", "TERM003",
                f"{proc.name}: (mutually) recursive procedure needs a"
                " recursion variant", proc.span))
        if proc.name not in recursive and proc.recursion_variant is not None:
            diags.append(Diagnostic(
                "warning", "TERM004",
                f"{proc.name}: recursion variant on a non-recursive procedure",
                proc.span))
    return diags


# ---------------------------------------------------------------------------
# Guard placement
# ---------------------------------------------------------------------------

def miracle_scan(proc: M.Procedure) -> list[Diagnostic]:
    """Guards after a state change cannot be backed out of; they are
    assumptions, not choices, and do not count towards enabledness."""
    diags: list[Diagnostic] = []
    for t in proc.transitions:
        changed = False
        for stmt in t.body:
            if isinstance(stmt, (M.Assign, M.Call)):
                changed = True
            elif isinstance(stmt, M.Guard) and changed:
                diags.append(Diagnostic(
                    "warning", "LIVE003",
                    f"{proc.name}: guard after a state change in"
                    f" {t.source}->{t.target} ({t.label}) is treated as an"
                    " assumption", stmt.span))
    return diags


# ---------------------------------------------------------------------------
# Orchestrator
# ---------------------------------------------------------------------------

def analyze(ctx: M.VerificationContext,
            theory: Optional[TheoryEnv] = None) -> list[Diagnostic]:
    theory = theory or builtin_theory()
    diags: list[Diagnostic] = []
    _, strategy_diags = resolve_strategy(ctx.strategy_lemmas, theory)
    diags.extend(strategy_diags)
    diags.extend(typecheck(ctx, theory))
    for proc in ctx.procedures:
        diags.extend(reachability_check(proc))
        diags.extend(termination_check(proc))
        diags.extend(miracle_scan(proc))
    diags.extend(recursion_check(ctx))
    return diags
