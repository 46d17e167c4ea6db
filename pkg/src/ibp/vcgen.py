"""Proof obligation generation.

Every transition is a small total-correctness theorem: from the source
situation's invariant, running the body must reach the target situation's
invariant, decrease the enclosing loop variant, satisfy asserts and callee
preconditions on the way, and stay inside the domains of partial
operations.  Obligations are emitted as sequents with a fixed antecedent
layout (in listing order):

  1. variant facts already established on this transition
  2. callee postconditions, instantiated at fresh result names
  3. earlier statement obligations (asserts, callee preconditions)
  4. guards, with prior assignments substituted through
  5. the disjunction of guard choices the source situation offers
     (only when there is more than one)
  6. the source situation's effective invariant, outermost first

A call's result is named after its argument: the first call that writes
`a` yields `a_1`, the next `a_2`, and so on -- which is why those names
are reserved at parse time.  Substitution never folds arithmetic, so
goals read like the source text (`0 + 1`, `k - 1 + 1`).

Obligation ids follow `proc/situation/t<i>[#<b>]/goal#<n>/<kind>` with a
per-kind counter; situation invariant domain checks use
`proc/situation/inv#<i>/goal#<n>/safety`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from . import model as M
from .analysis import call_graph_sccs, scc_by_situation
from .prelude import TheoryEnv, builtin_theory
from .source import SourceSpan

__all__ = ["VC", "wp", "generate_all", "vc_consistency", "vc_liveness",
           "vc_safety", "vc_recursion"]

KINDS = ("consistency", "liveness", "termination", "safety", "recursion")


@dataclass(frozen=True)
class VC:
    id: str
    kind: str
    procedure: str
    situation: str
    transition: Optional[str]
    antecedents: tuple[M.Expr, ...]
    consequent: M.Expr
    declarations: tuple[tuple[str, M.SemType], ...]
    description: str = ""
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Weakest preconditions with procedure calls
# ---------------------------------------------------------------------------

def wp(body, post: M.Expr, ctx: Optional[M.VerificationContext] = None) -> M.Expr:
    """wp of a straight-line body against `post`.

    Guards become implications, asserts conjunctions, assignments
    substitute; a call contributes its precondition and quantifies the
    postcondition over fresh result values.  Calls require `ctx`.
    """
    def call_rule(call: M.Call, q: M.Expr) -> M.Expr:
        if ctx is None:
            raise ValueError(f"wp of call to {call.proc!r} needs a context")
        callee = ctx.procedure(call.proc)
        value_map: dict[str, M.Expr] = {}
        old_map: dict[str, M.Expr] = {}
        valres: list[tuple[M.Param, M.Var]] = []
        for p, arg in zip(callee.params, call.args):
            value_map[p.name] = arg
            if p.valres:
                old_map[p.name] = arg
                assert isinstance(arg, M.Var)
                valres.append((p, arg))

        pre = M.conjoin(M.effective_invariant_exprs(callee.precondition))
        pre = M.substitute(pre, value_map, old_map)

        posts = callee.postconditions()
        post_formula = M.disjoin(
            M.conjoin(M.effective_invariant_exprs(s)) for s in posts)

        avoid = (M.free_vars(q) | M.free_vars(post_formula)
                 | {p.name for p in callee.params})
        for _, arg in valres:
            avoid |= {arg.name}
        res_map = dict(value_map)
        q_map: dict[str, M.Expr] = {}
        fresh: list[tuple[str, M.SemType]] = []
        for p, arg in valres:
            name = M._fresh_name(p.name, avoid)
            avoid.add(name)
            fresh.append((name, p.type))
            res_map[p.name] = M.Var(name)
            q_map[arg.name] = M.Var(name)

        inner = M.BinOp("=>", M.substitute(post_formula, res_map, old_map),
                        M.substitute(q, q_map))
        for name, ty in reversed(fresh):
            inner = M.Quant("forall", name, ty, inner)
        return M.BinOp("and", pre, inner)

    return M.wp_body(tuple(body), post, call_rule)


# ---------------------------------------------------------------------------
# Domain constraints (definedness) of an expression
# ---------------------------------------------------------------------------

def _domain_constraints(e: M.Expr, theory: TheoryEnv):
    """Yield (prefix, constraint) pairs for partial operations in `e`.

    `prefix` is the mixed list of path conditions and quantifier binders
    in force at the occurrence, innermost last; path conditions reflect
    short-circuit evaluation.  Theory definitions are not re-checked:
    their own bodies are total by construction, only the declared
    parameter ranges matter at the use site.
    """
    def go(node: M.Expr, prefix: tuple) -> Iterator[tuple[tuple, M.Expr]]:
        if isinstance(node, (M.IntLit, M.BoolLit, M.Var, M.OldVar)):
            return
        if isinstance(node, M.BinOp):
            if node.op in ("and", "=>"):
                yield from go(node.left, prefix)
                yield from go(node.right, prefix + (("cond", node.left),))
                return
            if node.op == "or":
                yield from go(node.left, prefix)
                neg = M.UnaryOp("not", node.left)
                yield from go(node.right, prefix + (("cond", neg),))
                return
            if node.op == "div":
                yield from go(node.left, prefix)
                yield from go(node.right, prefix)
                if not (isinstance(node.right, M.IntLit)
                        and node.right.value > 0):
                    yield prefix, M.BinOp("/=", node.right, M.IntLit(0),
                                          span=node.span)
                return
            yield from go(node.left, prefix)
            yield from go(node.right, prefix)
            return
        if isinstance(node, M.UnaryOp):
            yield from go(node.operand, prefix)
            return
        if isinstance(node, M.Ite):
            yield from go(node.cond, prefix)
            yield from go(node.then, prefix + (("cond", node.cond),))
            neg = M.UnaryOp("not", node.cond)
            yield from go(node.other, prefix + (("cond", neg),))
            return
        if isinstance(node, M.ArrLen):
            yield from go(node.vec, prefix)
            return
        if isinstance(node, (M.ArrGet, M.ArrSet)):
            yield from go(node.vec, prefix)
            yield from go(node.index, prefix)
            lo = M.BinOp("<=", M.IntLit(0), node.index)
            hi = M.BinOp("<", node.index, M.ArrLen(node.vec))
            yield prefix, M.BinOp("and", lo, hi, span=node.span)
            if isinstance(node, M.ArrSet):
                yield from go(node.value, prefix)
            return
        if isinstance(node, M.App):
            for a in node.args:
                yield from go(a, prefix)
            fd = theory.resolve(node.func, len(node.args))
            if fd is not None and fd.domain:
                binding = {p.name: a for p, a in zip(fd.params, node.args)}
                cons = M.conjoin(M.substitute(d, binding) for d in fd.domain)
                if cons.span is None:
                    object.__setattr__(cons, "span", node.span)
                yield prefix, cons
            return
        if isinstance(node, M.Quant):
            yield from go(node.body,
                          prefix + (("binder", node.var, node.var_type),))
            return
        raise TypeError(f"unexpected node {node!r}")

    yield from go(e, ())


def _close_constraint(prefix: tuple, constraint: M.Expr):
    """Split a walker prefix into outer conditions (usable as sequent
    antecedents) and a residual goal wrapped under binders."""
    first_binder = next((i for i, item in enumerate(prefix)
                         if item[0] == "binder"), len(prefix))
    outer = [item[1] for item in prefix[:first_binder]]
    goal = constraint
    inner = prefix[first_binder:]
    for item in reversed(inner):
        if item[0] == "cond":
            goal = M.BinOp("=>", item[1], goal)
        else:
            goal = M.Quant("forall", item[1], item[2], goal)
    return outer, goal


# ---------------------------------------------------------------------------
# Per-procedure generation
# ---------------------------------------------------------------------------

class _ProcGen:
    def __init__(self, ctx: M.VerificationContext, proc: M.Procedure,
                 theory: TheoryEnv, recursive: frozenset[str]):
        self.ctx = ctx
        self.proc = proc
        self.theory = theory
        self.recursive = recursive
        self.sccs = scc_by_situation(proc)
        self.variables = {c.name: c.type for c in ctx.constants}
        for p in proc.params:
            self.variables[p.name] = p.type
        for v in proc.locals:
            self.variables[v.name] = v.type
        self.valres = {p.name: p.type for p in proc.valres_params()}

    # -- helpers ------------------------------------------------------------

    def _declarations(self, exprs) -> tuple[tuple[str, M.SemType], ...]:
        names: set[str] = set()
        olds: set[str] = set()
        for e in exprs:
            names |= M.free_vars(e)
            olds |= M.old_vars(e)
        decls: dict[str, M.SemType] = {}
        for n in sorted(names):
            ty = self.variables.get(n)
            if ty is None:
                base = n.rsplit("_", 1)[0]
                ty = self.variables.get(base)  # fresh call results a_1, a_2
            if ty is not None:
                decls[n] = ty
        for n in sorted(olds):
            ty = self.valres.get(n) or self.variables.get(n)
            if ty is not None:
                decls[f"{n}_0"] = ty
        return tuple(sorted(decls.items()))

    def _group_choice(self, situation: str) -> Optional[M.Expr]:
        """Disjunction over the head guards of each outgoing declaration."""
        heads: list[tuple[int, tuple[M.Expr, ...]]] = []
        seen: set[int] = set()
        for t in self.proc.outgoing(situation):
            if t.index not in seen:
                seen.add(t.index)
                heads.append((t.index, t.group_head))
        if len(heads) < 2:
            return None
        heads.sort()
        return M.disjoin(M.conjoin(h) for _, h in heads)

    def _invariant_antecedents(self, situation: M.Situation,
                               entry_olds) -> list[M.Expr]:
        exprs = M.effective_invariant_exprs(situation)
        if entry_olds:
            exprs = [M.substitute(e, {}, entry_olds) for e in exprs]
        return exprs

    # -- transitions ----------------------------------------------------------

    def transition_vcs(self, t: M.Transition) -> list[VC]:
        proc = self.proc
        source = proc.situation(t.source)
        target = proc.situation(t.target)
        entry = source.kind is M.SituationKind.PRECONDITION
        entry_olds = ({name: M.Var(name) for name in self.valres}
                      if entry else {})

        def applied(e: M.Expr, sigma) -> M.Expr:
            return M.substitute(e, sigma, entry_olds)

        choice = self._group_choice(t.source)
        inv_ants = self._invariant_antecedents(source, entry_olds)

        term_ants: list[M.Expr] = []
        post_ants: list[M.Expr] = []
        stmt_ants: list[M.Expr] = []
        guard_ants: list[M.Expr] = []

        counters = {k: 0 for k in KINDS}
        vcs: list[VC] = []

        def emit(kind: str, consequent: M.Expr, description: str,
                 extra_ants=(), span=None) -> None:
            ants = (tuple(term_ants) + tuple(post_ants) + tuple(stmt_ants)
                    + tuple(guard_ants) + tuple(extra_ants)
                    + ((choice,) if choice is not None else ())
                    + tuple(inv_ants))
            n = counters[kind]
            counters[kind] += 1
            vc_id = (f"{proc.name}/{t.source}/{t.label}/goal#{n}/{kind}")
            vcs.append(VC(
                id=vc_id, kind=kind, procedure=proc.name, situation=t.source,
                transition=t.label, antecedents=ants, consequent=consequent,
                declarations=self._declarations(ants + (consequent,)),
                description=description, span=span or t.span))

        def emit_domain_checks(expr: M.Expr, sigma, what: str) -> None:
            for prefix, constraint in _domain_constraints(expr, self.theory):
                outer, goal = _close_constraint(prefix, constraint)
                emit("safety", applied(goal, sigma),
                     f"{what} stays within operation domains",
                     extra_ants=tuple(applied(c, sigma) for c in outer),
                     span=constraint.span)

        sigma: dict[str, M.Expr] = {}
        fresh_counter: dict[str, int] = {}

        for stmt in t.body:
            if isinstance(stmt, M.Guard):
                emit_domain_checks(stmt.cond, sigma, "guard")
                guard_ants.append(applied(stmt.cond, sigma))
            elif isinstance(stmt, M.Assert):
                emit_domain_checks(stmt.cond, sigma, "assert")
                obligation = applied(stmt.cond, sigma)
                emit("consistency", obligation, "assert holds", span=stmt.span)
                stmt_ants.append(obligation)
            elif isinstance(stmt, M.Assign):
                emit_domain_checks(stmt.value, sigma, "assignment")
                sigma = dict(sigma)
                sigma[stmt.target] = applied(stmt.value, sigma)
            elif isinstance(stmt, M.Call):
                callee = self.ctx.procedure(stmt.proc)
                for arg in stmt.args:
                    emit_domain_checks(arg, sigma, "call argument")

                value_map = {p.name: applied(a, sigma)
                             for p, a in zip(callee.params, stmt.args)}
                old_map = {p.name: value_map[p.name]
                           for p in callee.params if p.valres}

                for pre_expr in M.effective_invariant_exprs(
                        callee.precondition):
                    inst = M.substitute(pre_expr, value_map, old_map)
                    for conj in M.conjuncts(inst):
                        emit("consistency", conj,
                             f"precondition of {callee.name}", span=stmt.span)
                        stmt_ants.append(conj)

                if (proc.name in self.recursive
                        and callee.name in self.recursive
                        and callee.recursion_variant is not None
                        and proc.recursion_variant is not None):
                    callee_v = M.substitute(callee.recursion_variant,
                                            value_map, old_map)
                    # the caller's variant is measured at its own entry,
                    # where a valres parameter still has its old value
                    if entry:
                        caller_v = proc.recursion_variant
                    else:
                        caller_v = M.substitute(
                            proc.recursion_variant,
                            {n: M.OldVar(n) for n in self.valres})
                    emit("recursion",
                         M.BinOp("<=", M.IntLit(0), callee_v),
                         f"recursion variant of {callee.name} is a nat",
                         span=stmt.span)
                    emit("recursion", M.BinOp("<", callee_v, caller_v),
                         f"recursion variant decreases calling {callee.name}",
                         span=stmt.span)

                sigma = dict(sigma)
                result_map = dict(value_map)
                for p, arg in zip(callee.params, stmt.args):
                    if p.valres:
                        assert isinstance(arg, M.Var)
                        n = fresh_counter.get(arg.name, 0) + 1
                        fresh_counter[arg.name] = n
                        fresh = M.Var(f"{arg.name}_{n}")
                        sigma[arg.name] = fresh
                        result_map[p.name] = fresh
                        self.variables.setdefault(f"{arg.name}_{n}", p.type)

                posts = callee.postconditions()
                if len(posts) == 1:
                    for pe in M.effective_invariant_exprs(posts[0]):
                        post_ants.append(
                            M.substitute(pe, result_map, old_map))
                else:
                    post_ants.append(M.disjoin(
                        M.substitute(
                            M.conjoin(M.effective_invariant_exprs(s)),
                            result_map, old_map)
                        for s in posts))

        scc = self.sccs.get(t.source)
        internal = (scc is not None and t.target in scc.members
                    and scc.cyclic)
        if internal and scc.variant is not None:
            v_after = applied(scc.variant, sigma)
            lower = M.BinOp("<=", M.IntLit(0), v_after)
            emit("termination", lower, "variant stays a nat")
            term_ants.append(lower)
            decrease = M.BinOp("<", v_after, scc.variant)
            emit("termination", decrease, "variant decreases")
            term_ants.append(decrease)

        for inv in M.effective_invariant_exprs(target):
            for conj in M.conjuncts(inv):
                emit("consistency", applied(conj, sigma),
                     f"establishes {t.target}", span=conj.span)

        return vcs

    # -- liveness --------------------------------------------------------------

    def liveness_vc(self, situation: M.Situation) -> Optional[VC]:
        outgoing = self.proc.outgoing(situation.name)
        if not outgoing or situation.kind is M.SituationKind.POSTCONDITION:
            return None
        entry_olds = ({name: M.Var(name) for name in self.valres}
                      if situation.kind is M.SituationKind.PRECONDITION
                      else {})
        parts = []
        for t in sorted(outgoing, key=lambda t: (t.index, t.branch or 0)):
            en = M.enabledness(t)
            if entry_olds:
                en = M.substitute(en, {}, entry_olds)
            parts.append(en)
        ants = tuple(self._invariant_antecedents(situation, entry_olds))
        consequent = M.disjoin(parts)
        return VC(
            id=f"{self.proc.name}/{situation.name}/live/goal#0/liveness",
            kind="liveness", procedure=self.proc.name,
            situation=situation.name, transition=None,
            antecedents=ants, consequent=consequent,
            declarations=self._declarations(ants + (consequent,)),
            description="some outgoing transition is enabled",
            span=situation.span)

    # -- situation invariant domains -------------------------------------------

    def situation_safety_vcs(self, situation: M.Situation) -> list[VC]:
        vcs: list[VC] = []
        ancestor_exprs: list[M.Expr] = []
        for anc in situation.ancestors()[:-1]:
            ancestor_exprs.extend(anc.invariants)

        def emit(tag: str, context, expr: M.Expr) -> None:
            n = 0
            for prefix, constraint in _domain_constraints(expr, self.theory):
                outer, goal = _close_constraint(prefix, constraint)
                ants = tuple(context) + tuple(outer)
                vc_id = (f"{self.proc.name}/{situation.name}/{tag}"
                         f"/goal#{n}/safety")
                n += 1
                vcs.append(VC(
                    id=vc_id, kind="safety", procedure=self.proc.name,
                    situation=situation.name, transition=None,
                    antecedents=ants, consequent=goal,
                    declarations=self._declarations(ants + (goal,)),
                    description="invariant stays within operation domains",
                    span=constraint.span))

        seen: list[M.Expr] = []
        for i, inv in enumerate(situation.invariants):
            emit(f"inv#{i}", ancestor_exprs + seen, inv)
            seen.append(inv)
        if situation.variant is not None:
            emit("variant", ancestor_exprs + seen, situation.variant)
        return vcs


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def generate_all(ctx: M.VerificationContext,
                 theory: Optional[TheoryEnv] = None,
                 proc: Optional[str] = None) -> list[VC]:
    """Every obligation of the context, in a deterministic order:
    per procedure, first situation domain checks, then each transition's
    goals in generation order, then liveness per situation."""
    theory = theory or builtin_theory()
    recursive = frozenset(n for comp in call_graph_sccs(ctx) for n in comp)
    out: list[VC] = []
    for p in ctx.procedures:
        if proc is not None and p.name != proc:
            continue
        gen = _ProcGen(ctx, p, theory, recursive)
        for s in p.all_situations():
            out.extend(gen.situation_safety_vcs(s))
        for t in p.transitions:
            out.extend(gen.transition_vcs(t))
        for s in p.all_situations():
            vc = gen.liveness_vc(s)
            if vc is not None:
                out.append(vc)
    return out


def _filtered(ctx, theory, proc, kinds) -> list[VC]:
    return [vc for vc in generate_all(ctx, theory, proc) if vc.kind in kinds]


def vc_consistency(ctx, theory=None, proc=None) -> list[VC]:
    """Transition correctness: asserts, callee preconditions, target
    invariants, and the variant obligations threaded between them."""
    return _filtered(ctx, theory, proc, ("consistency", "termination"))


def vc_liveness(ctx, theory=None, proc=None) -> list[VC]:
    return _filtered(ctx, theory, proc, ("liveness",))


def vc_safety(ctx, theory=None, proc=None) -> list[VC]:
    return _filtered(ctx, theory, proc, ("safety",))


def vc_recursion(ctx, theory=None, proc=None) -> list[VC]:
    return _filtered(ctx, theory, proc, ("recursion",))
