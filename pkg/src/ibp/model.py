"""Core model for invariant diagrams.

Expressions, transition statements, situation trees and procedures are
immutable dataclasses.  Structural equality deliberately ignores source
spans and cached types so that two parses of the same text compare equal.

The operations that the rest of the pipeline is built on live here too:
capture-avoiding substitution, effective (inherited) invariants, and the
enabledness condition of a transition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Mapping, Optional

from .source import SourceSpan


class SemType(enum.Enum):
    INT = "int"
    NAT = "nat"
    BOOL = "bool"
    VEC = "vector"

    def __str__(self):
        return self.value

    @property
    def is_numeric(self) -> bool:
        return self in (SemType.INT, SemType.NAT)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)
    # Type cache, filled in by the typechecker; not part of identity.
    ty: Optional[SemType] = field(default=None, compare=False, repr=False, kw_only=True)

    def set_type(self, ty: SemType) -> None:
        object.__setattr__(self, "ty", ty)


@dataclass(frozen=True)
class IntLit(Expr):
    value: int = 0


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool = False


@dataclass(frozen=True)
class Var(Expr):
    name: str = ""


@dataclass(frozen=True)
class OldVar(Expr):
    """Entry value of a valres parameter, written `x_0` in source."""
    name: str = ""


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str = ""          # "-" | "not"
    operand: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class BinOp(Expr):
    op: str = ""        # + - * div  = /= < <= > >=  and or => <=>
    left: Expr = None   # type: ignore[assignment]
    right: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr = None   # type: ignore[assignment]
    then: Expr = None   # type: ignore[assignment]
    other: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ArrLen(Expr):
    vec: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ArrGet(Expr):
    vec: Expr = None    # type: ignore[assignment]
    index: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ArrSet(Expr):
    vec: Expr = None    # type: ignore[assignment]
    index: Expr = None  # type: ignore[assignment]
    value: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class App(Expr):
    """Application of a theory-defined or builtin function/predicate."""
    func: str = ""
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Quant(Expr):
    kind: str = "forall"  # "forall" | "exists"
    var: str = ""
    var_type: SemType = SemType.INT
    body: Expr = None  # type: ignore[assignment]


TRUE = BoolLit(True)
FALSE = BoolLit(False)

COMPARISONS = ("=", "/=", "<", "<=", ">", ">=")
CONNECTIVES = ("and", "or", "=>", "<=>")
ARITH_OPS = ("+", "-", "*", "div")


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, UnaryOp):
        return (e.operand,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Ite):
        return (e.cond, e.then, e.other)
    if isinstance(e, ArrLen):
        return (e.vec,)
    if isinstance(e, ArrGet):
        return (e.vec, e.index)
    if isinstance(e, ArrSet):
        return (e.vec, e.index, e.value)
    if isinstance(e, App):
        return e.args
    if isinstance(e, Quant):
        return (e.body,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal of an expression tree."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def free_vars(e: Expr) -> set[str]:
    """Names of free (non-quantified) program variables."""
    out: set[str] = set()

    def go(node: Expr, bound: frozenset[str]) -> None:
        if isinstance(node, Var):
            if node.name not in bound:
                out.add(node.name)
        elif isinstance(node, Quant):
            go(node.body, bound | {node.var})
        else:
            for c in children(node):
                go(c, bound)

    go(e, frozenset())
    return out


def old_vars(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, OldVar)}


def _fresh_name(base: str, avoid: set[str]) -> str:
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def substitute(
    e: Expr,
    bindings: Mapping[str, Expr],
    old_bindings: Mapping[str, Expr] | None = None,
) -> Expr:
    """Replace free occurrences of variables by expressions.

    `bindings` targets `Var` nodes, `old_bindings` targets `OldVar` nodes.
    A quantifier whose bound variable shadows a binding suspends that
    binding inside its body; if the bound variable would capture a free
    variable of a substituted expression, the quantifier is renamed first.
    """
    old_bindings = old_bindings or {}

    def go(node: Expr, binds: Mapping[str, Expr]) -> Expr:
        if isinstance(node, Var):
            return binds.get(node.name, node)
        if isinstance(node, OldVar):
            return old_bindings.get(node.name, node)
        if isinstance(node, (IntLit, BoolLit)):
            return node
        if isinstance(node, Quant):
            inner = {k: v for k, v in binds.items() if k != node.var}
            if not inner and not old_bindings:
                return node
            var, body = node.var, node.body
            clash = set()
            for v in inner.values():
                clash |= free_vars(v)
            for v in old_bindings.values():
                clash |= free_vars(v)
            if var in clash:
                avoid = clash | free_vars(body) | set(inner)
                fresh = _fresh_name(var, avoid)
                body = go(body, {var: Var(fresh)})
                var = fresh
            new_body = go(body, inner)
            if new_body is node.body and var == node.var:
                return node
            return Quant(node.kind, var, node.var_type, new_body, span=node.span)

        kids = children(node)
        new_kids = tuple(go(c, binds) for c in kids)
        if all(a is b for a, b in zip(kids, new_kids)):
            return node
        if isinstance(node, UnaryOp):
            return UnaryOp(node.op, new_kids[0], span=node.span)
        if isinstance(node, BinOp):
            return BinOp(node.op, new_kids[0], new_kids[1], span=node.span)
        if isinstance(node, Ite):
            return Ite(new_kids[0], new_kids[1], new_kids[2], span=node.span)
        if isinstance(node, ArrLen):
            return ArrLen(new_kids[0], span=node.span)
        if isinstance(node, ArrGet):
            return ArrGet(new_kids[0], new_kids[1], span=node.span)
        if isinstance(node, ArrSet):
            return ArrSet(new_kids[0], new_kids[1], new_kids[2], span=node.span)
        if isinstance(node, App):
            return App(node.func, new_kids, span=node.span)
        raise TypeError(f"unknown expression node {node!r}")

    if not bindings and not old_bindings:
        return e
    return go(e, dict(bindings))


def conjuncts(e: Expr) -> list[Expr]:
    """Split through top-level conjunctions, left to right."""
    if isinstance(e, BinOp) and e.op == "and":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def conjoin(parts: Iterable[Expr]) -> Expr:
    acc: Optional[Expr] = None
    for p in parts:
        acc = p if acc is None else BinOp("and", acc, p)
    return acc if acc is not None else TRUE


def disjoin(parts: Iterable[Expr]) -> Expr:
    acc: Optional[Expr] = None
    for p in parts:
        acc = p if acc is None else BinOp("or", acc, p)
    return acc if acc is not None else FALSE


def simplify(e: Expr) -> Expr:
    """Constant-fold boolean structure; used to keep enabledness readable.

    Purely propositional: no arithmetic is evaluated and no atoms are
    rewritten, so the result is logically equivalent to the input.
    """
    def is_true(x: Expr) -> bool:
        return isinstance(x, BoolLit) and x.value

    def is_false(x: Expr) -> bool:
        return isinstance(x, BoolLit) and not x.value

    def go(node: Expr) -> Expr:
        if isinstance(node, UnaryOp) and node.op == "not":
            a = go(node.operand)
            if is_true(a):
                return FALSE
            if is_false(a):
                return TRUE
            if isinstance(a, UnaryOp) and a.op == "not":
                return a.operand
            if isinstance(a, BinOp) and a.op == "=>":
                # not (p => q)  ~~>  p and not q
                return go(BinOp("and", a.left, UnaryOp("not", a.right)))
            return UnaryOp("not", a, span=node.span)
        if isinstance(node, BinOp) and node.op in CONNECTIVES:
            a, b = go(node.left), go(node.right)
            if node.op == "and":
                if is_false(a) or is_false(b):
                    return FALSE
                if is_true(a):
                    return b
                if is_true(b):
                    return a
            elif node.op == "or":
                if is_true(a) or is_true(b):
                    return TRUE
                if is_false(a):
                    return b
                if is_false(b):
                    return a
            elif node.op == "=>":
                if is_false(a) or is_true(b):
                    return TRUE
                if is_true(a):
                    return b
                if is_false(b):
                    return go(UnaryOp("not", a))
            elif node.op == "<=>":
                if is_true(a):
                    return b
                if is_true(b):
                    return a
            return BinOp(node.op, a, b, span=node.span)
        return node

    return go(e)


# ---------------------------------------------------------------------------
# Statements and transitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Statement:
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Guard(Statement):
    cond: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Assert(Statement):
    cond: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Assign(Statement):
    target: str = ""
    value: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Call(Statement):
    proc: str = ""
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    body: tuple[Statement, ...]
    # Declaration-order index of the (possibly branching) source transition
    # and the leaf index within it; a non-branching transition has branch None.
    index: int = 0
    branch: Optional[int] = None
    # Guard conjuncts of the statement prefix shared by every leaf of the
    # same declaration.  Drives the disjunction of choices a situation offers.
    group_head: tuple[Expr, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)

    @property
    def label(self) -> str:
        if self.branch is None:
            return f"t{self.index}"
        return f"t{self.index}#{self.branch}"


def head_guards(body: tuple[Statement, ...]) -> list[Expr]:
    """Guard conjuncts of the maximal leading run of guard statements."""
    out: list[Expr] = []
    for stmt in body:
        if not isinstance(stmt, Guard):
            break
        out.extend(conjuncts(stmt.cond))
    return out


# ---------------------------------------------------------------------------
# Situations, procedures, contexts
# ---------------------------------------------------------------------------

class SituationKind(enum.Enum):
    PRECONDITION = "precondition"
    INTERMEDIATE = "situation"
    POSTCONDITION = "postcondition"


@dataclass(frozen=True)
class Situation:
    name: str
    kind: SituationKind
    invariants: tuple[Expr, ...]
    variant: Optional[Expr] = None
    children: tuple["Situation", ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)
    parent: Optional["Situation"] = field(default=None, compare=False, repr=False, kw_only=True)

    def __post_init__(self):
        for c in self.children:
            object.__setattr__(c, "parent", self)

    def ancestors(self) -> list["Situation"]:
        """Self and enclosing situations, outermost first."""
        chain: list[Situation] = []
        node: Optional[Situation] = self
        while node is not None:
            chain.append(node)
            node = node.parent
        chain.reverse()
        return chain

    def subtree(self) -> Iterator["Situation"]:
        yield self
        for c in self.children:
            yield from c.subtree()


def effective_invariant_exprs(s: Situation) -> list[Expr]:
    """Invariant expressions of s and all ancestors, outermost first."""
    out: list[Expr] = []
    for node in s.ancestors():
        out.extend(node.invariants)
    return out


def effective_invariant(s: Situation) -> Expr:
    return conjoin(effective_invariant_exprs(s))


@dataclass(frozen=True)
class Param:
    name: str
    type: SemType
    valres: bool = False
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Local:
    name: str
    type: SemType
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)


PRE_NAME = "Pre"


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple[Param, ...]
    locals: tuple[Local, ...]
    situations: tuple[Situation, ...]
    transitions: tuple[Transition, ...]
    recursion_variant: Optional[Expr] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)

    def all_situations(self) -> Iterator[Situation]:
        for s in self.situations:
            yield from s.subtree()

    def situation(self, name: str) -> Situation:
        for s in self.all_situations():
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def precondition(self) -> Situation:
        for s in self.all_situations():
            if s.kind is SituationKind.PRECONDITION:
                return s
        raise KeyError(f"{self.name}: no precondition situation")

    def postconditions(self) -> list[Situation]:
        return [s for s in self.all_situations()
                if s.kind is SituationKind.POSTCONDITION]

    def outgoing(self, situation: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == situation]

    def variable_type(self, name: str) -> Optional[SemType]:
        for p in self.params:
            if p.name == name:
                return p.type
        for v in self.locals:
            if v.name == name:
                return v.type
        return None

    def valres_params(self) -> list[Param]:
        return [p for p in self.params if p.valres]


@dataclass(frozen=True)
class VerificationContext:
    name: str
    constants: tuple[Param, ...] = ()
    imports: tuple[str, ...] = ()
    strategy_lemmas: tuple[str, ...] = ()
    procedures: tuple[Procedure, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)

    def procedure(self, name: str) -> Procedure:
        for p in self.procedures:
            if p.name == name:
                return p
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Weakest preconditions over transition bodies
# ---------------------------------------------------------------------------

CallRule = Callable[[Call, Expr], Expr]


def _havoc_call(call: Call, post: Expr) -> Expr:
    """Call rule used when no procedure table is at hand.

    A call establishes nothing and changes its valres arguments
    arbitrarily; with an always-false postcondition this is exact
    (a call is never miraculous), which is the only case enabledness
    relies on.  Otherwise the postcondition is left untouched, which
    matches treating post-call guards as assumptions.
    """
    if simplify(post) == FALSE:
        return FALSE
    return post


def wp_body(body: tuple[Statement, ...], post: Expr,
            call_rule: CallRule = _havoc_call) -> Expr:
    """Weakest precondition of a straight-line transition body."""
    q = post
    for stmt in reversed(body):
        if isinstance(stmt, Guard):
            q = BinOp("=>", stmt.cond, q)
        elif isinstance(stmt, Assert):
            q = BinOp("and", stmt.cond, q)
        elif isinstance(stmt, Assign):
            q = substitute(q, {stmt.target: stmt.value})
        elif isinstance(stmt, Call):
            q = call_rule(stmt, q)
        else:
            raise TypeError(f"unknown statement {stmt!r}")
    return q


def enabledness(t: Transition) -> Expr:
    """States from which the transition can run to completion.

    Computed as the negation of wp(body)(false) and simplified, so a
    body of guards and assignments reduces to the conjunction of its
    guards with intervening assignments substituted through.  Asserts
    do not block enabledness (they are obligations, not choices) and a
    call never behaves miraculously.
    """
    def rule(call: Call, post: Expr) -> Expr:
        return FALSE if simplify(post) == FALSE else post

    body = tuple(s for s in t.body if not isinstance(s, Assert))
    return simplify(UnaryOp("not", wp_body(body, FALSE, rule)))


__all__ = [
    "SemType", "Expr", "IntLit", "BoolLit", "Var", "OldVar", "UnaryOp",
    "BinOp", "Ite", "ArrLen", "ArrGet", "ArrSet", "App", "Quant",
    "TRUE", "FALSE", "COMPARISONS", "CONNECTIVES", "ARITH_OPS",
    "children", "walk", "free_vars", "old_vars", "substitute",
    "conjuncts", "conjoin", "disjoin", "simplify",
    "Statement", "Guard", "Assert", "Assign", "Call",
    "Transition", "head_guards",
    "SituationKind", "Situation", "effective_invariant",
    "effective_invariant_exprs",
    "Param", "Local", "Procedure", "VerificationContext",
    "wp_body", "enabledness",
]
