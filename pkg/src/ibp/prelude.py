"""Background theory: builtin vector functions, lemma library, user theories.

The builtin theory is written in the same surface syntax as user `.ibt`
files and parsed at import time, so the interpreter, the audit and the
documentation all share one definition.  For the solver backend each
builtin symbol additionally carries a hand-tuned SMT-LIB block whose
quantifier triggers have been chosen so that proofs go through without
model-based instantiation; user theories get a generic encoding.

Functions may be overloaded by arity; a duplicate (name, arity) pair is
an error.  `opaque` definitions keep their body for evaluation but are
not expanded for the solver - selected lemmas stand in for them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Callable, Optional

from . import model as M
from . import parser as P
from .source import Diagnostic

__all__ = [
    "FuncDef", "Lemma", "TheoryEnv", "DomainError",
    "builtin_theory", "load_theory", "resolve_strategy",
    "lemma_soundness_suite", "AuditResult",
]


class DomainError(Exception):
    """A builtin applied outside its domain (e.g. swap index out of range)."""


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[M.Param, ...]
    result: M.SemType
    domain: tuple[M.Expr, ...] = ()       # constraints over the parameters
    body: Optional[M.Expr] = None         # None: uninterpreted
    opaque: bool = False                  # body hidden from the solver
    native: Optional[Callable] = field(default=None, compare=False)
    smt_text: Optional[str] = None        # curated declaration + axioms
    order: int = 0

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)

    @property
    def transparent(self) -> bool:
        return self.body is not None and not self.opaque


@dataclass(frozen=True)
class Lemma:
    name: str
    statement: M.Expr                      # closed formula
    patterns: tuple[tuple[M.Expr, ...], ...] = ()  # trigger groups
    smt_text: Optional[str] = None
    order: int = 0


class TheoryEnv:
    """Resolved function and lemma tables, builtin plus imports."""

    def __init__(self):
        self.funcs: dict[tuple[str, int], FuncDef] = {}
        self.lemmas: dict[str, Lemma] = {}
        self.theories: tuple[str, ...] = ()

    def resolve(self, name: str, arity: int) -> Optional[FuncDef]:
        return self.funcs.get((name, arity))

    def arities(self, name: str) -> list[int]:
        return sorted(a for (n, a) in self.funcs if n == name)

    def copy(self) -> "TheoryEnv":
        env = TheoryEnv()
        env.funcs = dict(self.funcs)
        env.lemmas = dict(self.lemmas)
        env.theories = self.theories
        return env


# ---------------------------------------------------------------------------
# Builtin theory
# ---------------------------------------------------------------------------

_BUILTIN_SRC = """
theory builtin {
  uninterpreted perm(a: vector, b: vector): bool;

  opaque def swap(a: vector, i: index(a), j: index(a)): vector =
    a[i <- a[j]][j <- a[i]];

  def l(i: nat): nat = 2 * i + 1;
  def r(i: nat): nat = 2 * i + 2;

  def eql(a: vector, b: vector, lo: nat, hi: nat): bool =
    forall (i: nat):
      lo <= i and i < hi and i < len(a) and i < len(b) => a[i] = b[i];

  def sorted(a: vector, n: upto(len(a))): bool =
    forall (i, j: index(a)): n <= i and i < j => a[i] <= a[j];

  def sorted(a: vector): bool = sorted(a, 0);

  def heap(a: vector, m: nat, n: nat): bool =
    m <= n and n <= len(a) and
    (forall (i: nat): m <= i =>
      (l(i) < n => a[i] >= a[l(i)]) and (r(i) < n => a[i] >= a[r(i)]));

  def heap(a: vector, k: upto(len(a))): bool = heap(a, 0, k);

  def partitioned(a: vector, k: upto(len(a))): bool =
    forall (i, j: index(a)): i < k and k <= j => a[i] <= a[j];

  lemma perm_ref: forall (x: vector): perm(x, x);
  trigger perm_ref: len(x);

  lemma perm_sym: forall (x, y: vector): perm(x, y) => perm(y, x);
  trigger perm_sym: perm(x, y);

  lemma perm_trs: forall (x, y, z: vector):
    perm(x, y) and perm(y, z) => perm(x, z);
  trigger perm_trs: perm(x, y), perm(y, z);

  lemma perm_len: forall (x, y: vector): perm(x, y) => len(x) = len(y);
  trigger perm_len: perm(x, y);

  lemma swap_perm: forall (x: vector, i, j: index(x)): perm(swap(x, i, j), x);
  trigger swap_perm: swap(x, i, j);

  lemma swap_acc: forall (x: vector, i, j: index(x), t: index(x)):
    swap(x, i, j)[t] = x[if t = i then j elsif t = j then i else t endif];
  trigger swap_acc: swap(x, i, j)[t];

  lemma heap_max: forall (x: vector, k: upto(len(x))):
    heap(x, 0, k) => (forall (i: nat): i < k => x[i] <= x[0]);
  trigger heap_max: heap(x, 0, k);

  lemma perm_partitioned: forall (x: vector, y: vector, k: upto(len(x))):
    perm(x, y) and partitioned(x, k) and eql(x, y, k, len(x)) => partitioned(y, k);
  trigger perm_partitioned: perm(x, y), partitioned(x, k);
}
"""

# Solver-side blocks.  Overloaded names are arity-qualified (heap2/heap3,
# sorted1/sorted2).  The inner triggers matter: every quantifier must be
# instantiable by e-matching alone.  heap3's body mentions elem at l(i)/r(i),
# which feeds its own (elem a i) trigger; the :weight damps that loop.
_SMT_FUNCS = {
    ("perm", 2): "(declare-fun perm (Vec Vec) Bool)",
    ("swap", 3): """\
(declare-fun swap (Vec Int Int) Vec)
(assert (forall ((x Vec) (i Int) (j Int))
  (! (= (len (swap x i j)) (len x)) :pattern ((swap x i j)))))""",
    ("l", 1): "(define-fun l ((i Int)) Int (+ (* 2 i) 1))",
    ("r", 1): "(define-fun r ((i Int)) Int (+ (* 2 i) 2))",
    ("eql", 4): """\
(declare-fun eql (Vec Vec Int Int) Bool)
(assert (forall ((a Vec) (b Vec) (lo Int) (hi Int))
  (! (= (eql a b lo hi)
        (forall ((i Int))
          (! (=> (and (>= i 0) (<= lo i) (< i hi) (< i (len a)) (< i (len b)))
                 (= (elem a i) (elem b i)))
             :pattern ((elem a i)) :pattern ((elem b i)))))
     :pattern ((eql a b lo hi)))))""",
    ("sorted", 2): """\
(declare-fun sorted2 (Vec Int) Bool)
(assert (forall ((a Vec) (n Int))
  (! (= (sorted2 a n)
        (forall ((i Int) (j Int))
          (! (=> (and (>= i 0) (>= j 0) (< i (len a)) (< j (len a))
                      (<= n i) (< i j))
                 (<= (elem a i) (elem a j)))
             :pattern ((elem a i) (elem a j)))))
     :pattern ((sorted2 a n)))))""",
    ("sorted", 1): "(define-fun sorted1 ((a Vec)) Bool (sorted2 a 0))",
    ("heap", 3): """\
(declare-fun heap3 (Vec Int Int) Bool)
(assert (forall ((a Vec) (m Int) (n Int))
  (! (= (heap3 a m n)
        (and (<= m n) (<= n (len a))
             (forall ((i Int))
               (! (=> (and (>= i 0) (<= m i))
                      (and (=> (< (l i) n) (>= (elem a i) (elem a (l i))))
                           (=> (< (r i) n) (>= (elem a i) (elem a (r i))))))
                  :weight 3 :pattern ((elem a i))))))
     :pattern ((heap3 a m n)))))""",
    ("heap", 2): "(define-fun heap2 ((a Vec) (k Int)) Bool (heap3 a 0 k))",
    ("partitioned", 2): """\
(declare-fun partitioned (Vec Int) Bool)
(assert (forall ((a Vec) (k Int))
  (! (= (partitioned a k)
        (forall ((i Int) (j Int))
          (! (=> (and (>= i 0) (>= j 0) (< i (len a)) (< j (len a))
                      (< i k) (<= k j))
                 (<= (elem a i) (elem a j)))
             :pattern ((elem a i) (elem a j)))))
     :pattern ((partitioned a k)))))""",
}

_SMT_LEMMAS = {
    "perm_ref": """\
(assert (forall ((x Vec)) (! (perm x x) :pattern ((len x)))))""",
    "perm_sym": """\
(assert (forall ((x Vec) (y Vec))
  (! (=> (perm x y) (perm y x)) :pattern ((perm x y)))))""",
    "perm_trs": """\
(assert (forall ((x Vec) (y Vec) (z Vec))
  (! (=> (and (perm x y) (perm y z)) (perm x z))
     :pattern ((perm x y) (perm y z)))))""",
    "perm_len": """\
(assert (forall ((x Vec) (y Vec))
  (! (=> (perm x y) (= (len x) (len y))) :pattern ((perm x y)))))""",
    "swap_perm": """\
(assert (forall ((x Vec) (i Int) (j Int))
  (! (=> (and (>= i 0) (< i (len x)) (>= j 0) (< j (len x)))
         (perm (swap x i j) x))
     :pattern ((swap x i j)))))""",
    "swap_acc": """\
(assert (forall ((x Vec) (i Int) (j Int) (t Int))
  (! (=> (and (>= i 0) (< i (len x)) (>= j 0) (< j (len x))
              (>= t 0) (< t (len x)))
         (= (elem (swap x i j) t)
            (elem x (ite (= t i) j (ite (= t j) i t)))))
     :pattern ((elem (swap x i j) t)))))""",
    "heap_max": """\
(assert (forall ((x Vec) (k Int))
  (! (=> (and (>= k 0) (<= k (len x)) (heap3 x 0 k))
         (forall ((i Int))
           (! (=> (and (>= i 0) (< i k)) (<= (elem x i) (elem x 0)))
              :weight 2 :pattern ((elem x i)))))
     :pattern ((heap3 x 0 k)))))""",
    "perm_partitioned": """\
(assert (forall ((x Vec) (y Vec) (k Int))
  (! (=> (and (>= k 0) (<= k (len x))
              (perm x y) (partitioned x k) (eql x y k (len x)))
         (partitioned y k))
     :pattern ((perm x y) (partitioned x k)))))""",
}


# -- native evaluation for the hot builtin predicates -----------------------

def _nat_l(i):
    return 2 * i + 1


def _nat_r(i):
    return 2 * i + 2


def _native_swap(a, i, j):
    if not (0 <= i < len(a) and 0 <= j < len(a)):
        raise DomainError(f"swap index out of range: len {len(a)}, i {i}, j {j}")
    b = list(a)
    b[i], b[j] = b[j], b[i]
    return tuple(b)


def _native_perm(a, b):
    return Counter(a) == Counter(b)


def _native_eql(a, b, lo, hi):
    stop = min(hi, len(a), len(b))
    return all(a[i] == b[i] for i in range(max(lo, 0), stop))


def _native_sorted2(a, n):
    return all(a[i] <= a[i + 1] for i in range(max(n, 0), len(a) - 1))


def _native_sorted1(a):
    return _native_sorted2(a, 0)


def _native_partitioned(a, k):
    k = max(k, 0)
    if k == 0 or k >= len(a):
        return True
    return max(a[:k]) <= min(a[k:])


def _native_heap3(a, m, n):
    if not (m <= n <= len(a)):
        return False
    for i in range(max(m, 0), n):
        left, right = 2 * i + 1, 2 * i + 2
        if left < n and a[i] < a[left]:
            return False
        if right < n and a[i] < a[right]:
            return False
    return True


def _native_heap2(a, k):
    return _native_heap3(a, 0, k)


_NATIVES = {
    ("l", 1): _nat_l,
    ("r", 1): _nat_r,
    ("swap", 3): _native_swap,
    ("perm", 2): _native_perm,
    ("eql", 4): _native_eql,
    ("sorted", 2): _native_sorted2,
    ("sorted", 1): _native_sorted1,
    ("partitioned", 2): _native_partitioned,
    ("heap", 3): _native_heap3,
    ("heap", 2): _native_heap2,
}


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _build_env(module: P.TheoryModule, base: Optional[TheoryEnv],
               smt_funcs=None, smt_lemmas=None, natives=None):
    env = base.copy() if base is not None else TheoryEnv()
    diags: list[Diagnostic] = []
    order0 = len(env.funcs) + len(env.lemmas)

    for i, d in enumerate(module.defs):
        params = []
        domain = []
        for p in d.params:
            params.append(M.Param(p.name, p.type.base))
            c = p.type.constraint_for(p.name)
            if c is not None:
                domain.append(c)
        fd = FuncDef(
            name=d.name, params=tuple(params), result=d.result,
            domain=tuple(domain), body=d.body, opaque=d.opaque,
            native=(natives or {}).get((d.name, len(params))),
            smt_text=(smt_funcs or {}).get((d.name, len(params))),
            order=order0 + i)
        if fd.key in env.funcs:
            diags.append(Diagnostic(
                "error", "RESOLVE002",
                f"duplicate definition {d.name}/{fd.arity}", d.span))
            continue
        env.funcs[fd.key] = fd

    trigger_map: dict[str, list[tuple[M.Expr, ...]]] = {}
    for t in module.triggers:
        trigger_map.setdefault(t.lemma, []).append(t.terms)

    for i, lm in enumerate(module.lemmas):
        if lm.name in env.lemmas:
            diags.append(Diagnostic(
                "error", "RESOLVE002", f"duplicate lemma {lm.name!r}", lm.span))
            continue
        env.lemmas[lm.name] = Lemma(
            name=lm.name, statement=lm.statement,
            patterns=tuple(trigger_map.pop(lm.name, [])),
            smt_text=(smt_lemmas or {}).get(lm.name),
            order=order0 + 1000 + i)

    for orphan, _ in trigger_map.items():
        diags.append(Diagnostic(
            "error", "RESOLVE001", f"trigger for unknown lemma {orphan!r}"))

    # definitions must not be (mutually) recursive: expansion has to stop
    def callees(key):
        fd = env.funcs[key]
        if fd.body is None:
            return set()
        return {(n.func, len(n.args)) for n in M.walk(fd.body)
                if isinstance(n, M.App) and (n.func, len(n.args)) in env.funcs}

    state: dict[tuple[str, int], int] = {}

    def cyclic(key) -> bool:
        if state.get(key) == 1:
            return True
        if state.get(key) == 2:
            return False
        state[key] = 1
        hit = any(cyclic(c) for c in callees(key))
        state[key] = 2
        return hit

    for key in list(env.funcs):
        if cyclic(key):
            diags.append(Diagnostic(
                "error", "RESOLVE003",
                f"recursive theory definition {key[0]}/{key[1]}"))
            break

    env.theories = env.theories + (module.name,)
    return env, diags


def _make_builtin() -> TheoryEnv:
    module = P.parse_theory_module(_BUILTIN_SRC, "<builtin>")
    assert isinstance(module, P.TheoryModule), module
    env, diags = _build_env(module, None, _SMT_FUNCS, _SMT_LEMMAS, _NATIVES)
    assert not diags, diags
    return env


_BUILTIN: Optional[TheoryEnv] = None


def builtin_theory() -> TheoryEnv:
    global _BUILTIN
    if _BUILTIN is None:
        _BUILTIN = _make_builtin()
    return _BUILTIN


def load_theory(text: str, file: str = "<theory>",
                base: Optional[TheoryEnv] = None):
    """Parse a user theory and merge it onto `base` (default: builtins).

    Returns a TheoryEnv, or a list of Diagnostics on any error.
    """
    module = P.parse_theory_module(text, file)
    if isinstance(module, list):
        return module
    env, diags = _build_env(module, base if base is not None else builtin_theory())
    return diags if diags else env


def resolve_strategy(names, env: TheoryEnv):
    """Map strategy lemma names to Lemma records; unknown names are errors."""
    lemmas: list[Lemma] = []
    diags: list[Diagnostic] = []
    for n in names:
        lm = env.lemmas.get(n)
        if lm is None:
            diags.append(Diagnostic(
                "error", "RESOLVE001", f"unknown lemma {n!r} in strategy"))
        else:
            lemmas.append(lm)
    return (lemmas, diags)


# ---------------------------------------------------------------------------
# Lemma audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditResult:
    lemma: str
    checked: int
    counterexample: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.counterexample is None


def _perm_partners(body: M.Expr) -> set[tuple[str, str]]:
    """Pairs of variable names related by a perm(...) atom in the formula."""
    pairs = set()
    for node in M.walk(body):
        if (isinstance(node, M.App) and node.func == "perm"
                and len(node.args) == 2
                and all(isinstance(a, M.Var) for a in node.args)):
            pairs.add((node.args[0].name, node.args[1].name))
    return pairs


def lemma_soundness_suite(env: Optional[TheoryEnv] = None,
                          lemmas=None,
                          max_len: int = 4,
                          lo: int = -2,
                          hi: int = 2) -> list[AuditResult]:
    """Exhaustively evaluate lemma statements over small vectors.

    Vectors range over every length up to `max_len` with entries in
    [lo, hi]; nat binders range over 0..max_len+2.  A vector variable
    that appears perm-linked to an already chosen one only ranges over
    its permutations, which keeps relational lemmas tractable without
    losing any potential countermodel of the perm atoms' consequents.
    """
    from .interp import eval_expr  # late import: interp depends on this module

    env = env or builtin_theory()
    nat_bound = max_len + 3
    vectors = [tuple(vs) for n in range(max_len + 1)
               for vs in product(range(lo, hi + 1), repeat=n)]

    results = []
    for lm in (lemmas if lemmas is not None else list(env.lemmas.values())):
        binders: list[tuple[str, M.SemType]] = []
        body = lm.statement
        while isinstance(body, M.Quant) and body.kind == "forall":
            binders.append((body.var, body.var_type))
            body = body.body
        pairs = _perm_partners(body)

        checked = 0
        counterexample = None

        def assign(idx: int, valuation: dict):
            nonlocal checked, counterexample
            if counterexample is not None:
                return
            if idx == len(binders):
                checked += 1
                if not eval_expr(body, valuation, env, nat_bound=nat_bound):
                    counterexample = dict(valuation)
                return
            name, ty = binders[idx]
            if ty is M.SemType.VEC:
                partner = next(
                    (u for (u, v) in pairs if v == name and u in valuation), None)
                if partner is None:
                    partner = next(
                        (v for (u, v) in pairs if u == name and v in valuation),
                        None)
                if partner is not None:
                    domain = sorted(set(permutations(valuation[partner])))
                else:
                    domain = vectors
            elif ty is M.SemType.NAT:
                domain = range(nat_bound)
            elif ty is M.SemType.INT:
                domain = range(lo, hi + 1)
            else:
                domain = (False, True)
            for value in domain:
                valuation[name] = value
                assign(idx + 1, valuation)
                if counterexample is not None:
                    return
            valuation.pop(name, None)

        assign(0, {})
        results.append(AuditResult(lm.name, checked, counterexample))
    return results
