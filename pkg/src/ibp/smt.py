"""SMT-LIB 2 backend.

Each obligation becomes a self-contained script: background symbols,
selected lemmas, constants, the antecedents asserted, the consequent
asserted negated, then `(check-sat)` -- `unsat` means proved, `sat` gives
a countermodel.  Scripts are sent to an external solver process on stdin.

Encoding choices that matter for reliability:

- model-based quantifier instantiation is off; every quantified axiom
  carries explicit triggers, so proofs are reproducible e-matching runs
  rather than heuristic searches.
- quantified vector predicates are declared functions with definitional
  axioms (macro expansion of nested quantifiers is both slow and
  trigger-hostile).
- `nat` constants get `(>= x 0)` facts at declaration; every vector
  constant gets a ground `(>= (len v) 0)` seed so length-triggered
  lemmas fire without any other vector term around.
- only symbols transitively reachable from the obligation are emitted,
  and a selected lemma is included only when all its symbols are
  reachable; unrelated background noise changes solver behaviour.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import model as M
from .prelude import Lemma, TheoryEnv, builtin_theory

__all__ = [
    "PROVED", "REFUTED", "UNKNOWN", "ERROR",
    "Verdict", "SolverConfig", "EncodeError", "encode", "run_solver",
    "check_all", "VCResult", "Report", "check_validity_batch",
    "default_solver_command", "SolverNotFound",
]

PROVED = "proved"
REFUTED = "refuted"
UNKNOWN = "unknown"
ERROR = "error"


@dataclass(frozen=True)
class Verdict:
    status: str
    detail: str = ""        # model for refuted, reason otherwise
    wall_ms: int = 0

    @property
    def proved(self) -> bool:
        return self.status == PROVED


@dataclass
class SolverConfig:
    command: Sequence[str]
    timeout_ms: int = 60_000
    jobs: int = 0           # 0: one per cpu

    def effective_jobs(self) -> int:
        if self.jobs > 0:
            return self.jobs
        return min(os.cpu_count() or 1, 8)


class EncodeError(Exception):
    pass


class SolverNotFound(Exception):
    pass


# ---------------------------------------------------------------------------
# Names
# ---------------------------------------------------------------------------

# names fixed by the hand-tuned background blocks
_FIXED_NAMES = {
    ("perm", 2): "perm", ("swap", 3): "swap", ("l", 1): "l", ("r", 1): "r",
    ("eql", 4): "eql", ("sorted", 2): "sorted2", ("sorted", 1): "sorted1",
    ("heap", 3): "heap3", ("heap", 2): "heap2", ("partitioned", 2):
    "partitioned",
}

_RESERVED = frozenset("""
    abs mod rem ite let select store distinct len elem Vec Int Bool
    assert check-sat push pop declare-fun define-fun declare-const
""".split())


def _fn_name(env: TheoryEnv, name: str, arity: int) -> str:
    fixed = _FIXED_NAMES.get((name, arity))
    if fixed is not None and (name, arity) in env.funcs \
            and env.funcs[(name, arity)].smt_text is not None:
        return fixed
    n = name if len(env.arities(name)) == 1 else f"{name}{arity}"
    if n in _RESERVED or n in _FIXED_NAMES.values():
        n = "u_" + n
    return n


def _sym(name: str) -> str:
    return "v_" + name if name in _RESERVED else name


_SORT = {M.SemType.INT: "Int", M.SemType.NAT: "Int",
         M.SemType.BOOL: "Bool", M.SemType.VEC: "Vec"}


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

class _Encoder:
    def __init__(self, env: TheoryEnv):
        self.env = env
        self.aux: list[str] = []
        self._aux_n = 0

    def term(self, e: M.Expr, depth: int = 0) -> str:
        t = self.term
        if isinstance(e, M.IntLit):
            return str(e.value) if e.value >= 0 else f"(- {-e.value})"
        if isinstance(e, M.BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, M.Var):
            return _sym(e.name)
        if isinstance(e, M.OldVar):
            return _sym(f"{e.name}_0")
        if isinstance(e, M.UnaryOp):
            op = "not" if e.op == "not" else "-"
            return f"({op} {t(e.operand, depth)})"
        if isinstance(e, M.BinOp):
            a, b = e.left, e.right
            if e.op == "div":
                if isinstance(b, M.IntLit) and b.value > 0:
                    return f"(div {t(a, depth)} {b.value})"
                x, y = t(a, depth), t(b, depth)
                return (f"(ite (>= {y} 0) (div {x} {y}) "
                        f"(div (- {x}) (- {y})))")
            if e.op == "/=":
                return f"(not (= {t(a, depth)} {t(b, depth)}))"
            op = {"=": "=", "<=>": "=", "=>": "=>"}.get(e.op, e.op)
            return f"({op} {t(a, depth)} {t(b, depth)})"
        if isinstance(e, M.Ite):
            return (f"(ite {t(e.cond, depth)} {t(e.then, depth)} "
                    f"{t(e.other, depth)})")
        if isinstance(e, M.ArrLen):
            return f"(len {t(e.vec, depth)})"
        if isinstance(e, M.ArrGet):
            return f"(elem {t(e.vec, depth)} {t(e.index, depth)})"
        if isinstance(e, M.ArrSet):
            if depth > 0:
                raise EncodeError(
                    "vector update under a quantifier is not encodable")
            return self._hoist_store(e)
        if isinstance(e, M.App):
            name = _fn_name(self.env, e.func, len(e.args))
            args = " ".join(t(a, depth) for a in e.args)
            return f"({name} {args})"
        if isinstance(e, M.Quant):
            return self.quant(e, depth)
        raise TypeError(f"unexpected node {e!r}")

    def quant(self, e: M.Quant, depth: int) -> str:
        binders = []
        guards = []
        body = e
        while isinstance(body, M.Quant) and body.kind == e.kind:
            binders.append(f"({_sym(body.var)} {_SORT[body.var_type]})")
            if body.var_type is M.SemType.NAT:
                guards.append(f"(>= {_sym(body.var)} 0)")
            body = body.body
        inner = self.term(body, depth + 1)
        if guards:
            g = guards[0] if len(guards) == 1 else f"(and {' '.join(guards)})"
            if e.kind == "forall":
                inner = f"(=> {g} {inner})"
            else:
                inner = f"(and {g} {inner})"
        return f"({e.kind} ({' '.join(binders)}) {inner})"

    def _hoist_store(self, e: M.ArrSet) -> str:
        base = self.term(e.vec, 0)
        idx = self.term(e.index, 0)
        val = self.term(e.value, 0)
        name = f"upd_{self._aux_n}"
        self._aux_n += 1
        self.aux.append(f"(declare-const {name} Vec)")
        self.aux.append(f"(assert (= (len {name}) (len {base})))")
        self.aux.append(
            f"(assert (forall ((t! Int)) (! (= (elem {name} t!) "
            f"(ite (= t! {idx}) {val} (elem {base} t!))) "
            f":pattern ((elem {name} t!)))))")
        return name


def _apps(exprs) -> set[tuple[str, int]]:
    out: set[tuple[str, int]] = set()
    for e in exprs:
        for node in M.walk(e):
            if isinstance(node, M.App):
                out.add((node.func, len(node.args)))
    return out


def _closure(env: TheoryEnv, exprs) -> set[tuple[str, int]]:
    seen: set[tuple[str, int]] = set()
    stack = list(_apps(exprs))
    while stack:
        key = stack.pop()
        if key in seen:
            continue
        seen.add(key)
        fd = env.resolve(*key)
        if fd is not None and fd.body is not None:
            stack.extend(_apps([fd.body]))
    return seen


def _uses_vectors(env, exprs, decls, closure) -> bool:
    for _, ty in decls:
        if ty is M.SemType.VEC:
            return True
    for key in closure:
        fd = env.resolve(*key)
        if fd is not None and (fd.result is M.SemType.VEC
                               or any(p.type is M.SemType.VEC
                                      for p in fd.params)):
            return True
    for e in exprs:
        for node in M.walk(e):
            if isinstance(node, (M.ArrLen, M.ArrGet, M.ArrSet)):
                return True
            if isinstance(node, M.Quant) and node.var_type is M.SemType.VEC:
                return True
    return False


_CORE = """\
(declare-sort Vec 0)
(declare-fun len (Vec) Int)
(declare-fun elem (Vec Int) Int)
(assert (forall ((v Vec)) (! (>= (len v) 0) :pattern ((len v)))))"""


def _func_block(env: TheoryEnv, enc: _Encoder, key) -> str:
    fd = env.resolve(*key)
    assert fd is not None
    if fd.smt_text is not None:
        return fd.smt_text
    name = _fn_name(env, *key)
    params = " ".join(f"({_sym(p.name)} {_SORT[p.type]})" for p in fd.params)
    sorts = " ".join(_SORT[p.type] for p in fd.params)
    ret = _SORT[fd.result]
    if fd.body is None or fd.opaque:
        return f"(declare-fun {name} ({sorts}) {ret})"
    has_quant = any(isinstance(n, M.Quant) for n in M.walk(fd.body))
    if not has_quant:
        return f"(define-fun {name} ({params}) {ret} {enc.term(fd.body, 1)})"
    # definitional axiom, triggered on the application itself
    app = f"({name} {' '.join(_sym(p.name) for p in fd.params)})"
    guards = [f"(>= {_sym(p.name)} 0)" for p in fd.params
              if p.type is M.SemType.NAT]
    eq = f"(= {app} {enc.term(fd.body, 1)})"
    if guards:
        g = guards[0] if len(guards) == 1 else f"(and {' '.join(guards)})"
        eq = f"(=> {g} {eq})"
    return (f"(declare-fun {name} ({sorts}) {ret})\n"
            f"(assert (forall ({params}) (! {eq} :pattern ({app}))))")


def _lemma_block(env: TheoryEnv, enc: _Encoder, lemma: Lemma) -> str:
    if lemma.smt_text is not None:
        return lemma.smt_text
    e = lemma.statement
    binders = []
    guards = []
    while isinstance(e, M.Quant) and e.kind == "forall":
        binders.append(f"({_sym(e.var)} {_SORT[e.var_type]})")
        if e.var_type is M.SemType.NAT:
            guards.append(f"(>= {_sym(e.var)} 0)")
        e = e.body
    body = enc.term(e, 1)
    if guards:
        g = guards[0] if len(guards) == 1 else f"(and {' '.join(guards)})"
        body = f"(=> {g} {body})"
    if not binders:
        return f"(assert {body})"
    pats = "".join(
        f" :pattern ({' '.join(enc.term(p, 1) for p in group)})"
        for group in lemma.patterns)
    if pats:
        body = f"(! {body}{pats})"
    return f"(assert (forall ({' '.join(binders)}) {body}))"


def _declaration_lines(decls) -> list[str]:
    lines = []
    for name, ty in decls:
        sym = _sym(name)
        lines.append(f"(declare-const {sym} {_SORT[ty]})")
        if ty is M.SemType.NAT:
            lines.append(f"(assert (>= {sym} 0))")
        elif ty is M.SemType.VEC:
            lines.append(f"(assert (>= (len {sym}) 0))")
    return lines


def _background(env: TheoryEnv, exprs, decls,
                lemmas: Sequence[Lemma]) -> tuple[list[str], list[Lemma]]:
    """Header, sorts, reachable function blocks and applicable lemmas."""
    closure = _closure(env, exprs)
    lines = ["(set-option :smt.auto-config false)",
             "(set-option :smt.mbqi false)"]
    if _uses_vectors(env, exprs, decls, closure):
        lines.append(_CORE)
    enc = _Encoder(env)
    known = [k for k in closure if k in env.funcs]
    for key in sorted(known, key=lambda k: (env.funcs[k].order, k)):
        lines.append(_func_block(env, enc, key))
    used = []
    for lemma in lemmas:
        if _apps([lemma.statement]) <= closure:
            lines.append(_lemma_block(env, enc, lemma))
            used.append(lemma)
    lines.extend(enc.aux)  # lemma encoding never hoists, but keep the order
    return lines, used


def encode(vc, env: Optional[TheoryEnv] = None,
           lemmas: Sequence[Lemma] = ()) -> str:
    """Full SMT-LIB script for one obligation."""
    env = env or builtin_theory()
    exprs = list(vc.antecedents) + [vc.consequent]
    lines, _ = _background(env, exprs, vc.declarations, lemmas)
    lines.extend(_declaration_lines(vc.declarations))
    enc = _Encoder(env)
    body: list[str] = []
    for a in vc.antecedents:
        body.append(f"(assert {enc.term(a)})")
    body.append(f"(assert (not {enc.term(vc.consequent)}))")
    lines.extend(enc.aux)
    lines.extend(body)
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Driving the solver
# ---------------------------------------------------------------------------

def default_solver_command() -> list[str]:
    """IBP_SOLVER, else the bundled node adapter, else z3 on PATH."""
    spec = os.environ.get("IBP_SOLVER")
    if spec:
        return shlex.split(spec)
    roots = [Path.cwd(), *Path.cwd().parents]
    here = Path(__file__).resolve()
    roots.extend(here.parents)
    for root in roots:
        cand = root / "solver" / "z3_stdin.mjs"
        if cand.is_file():
            return ["node", str(cand)]
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    raise SolverNotFound(
        "no SMT solver found: set IBP_SOLVER, install the bundled node "
        "adapter (solver/z3_stdin.mjs), or put z3 on PATH")


def run_solver(script: str, config: SolverConfig) -> Verdict:
    """One script, one verdict.  The first sat/unsat/unknown line decides;
    later output (like the model echo after unsat) is tolerated."""
    t0 = time.monotonic()
    try:
        proc = subprocess.run(
            list(config.command), input=script.encode(),
            capture_output=True, timeout=config.timeout_ms / 1000)
    except subprocess.TimeoutExpired:
        return Verdict(UNKNOWN, "timeout",
                       wall_ms=int((time.monotonic() - t0) * 1000))
    except OSError as exc:
        return Verdict(ERROR, f"cannot run solver: {exc}")
    wall = int((time.monotonic() - t0) * 1000)
    out = proc.stdout.decode(errors="replace")
    lines = [ln.strip() for ln in out.splitlines() if ln.strip()]
    for i, ln in enumerate(lines):
        if ln == "unsat":
            return Verdict(PROVED, wall_ms=wall)
        if ln == "sat":
            model = "\n".join(lines[i + 1:])
            return Verdict(REFUTED, model, wall_ms=wall)
        if ln == "unknown":
            return Verdict(UNKNOWN, "solver returned unknown", wall_ms=wall)
        if ln.startswith("(error"):
            return Verdict(ERROR, ln, wall_ms=wall)
    err = proc.stderr.decode(errors="replace").strip()
    detail = err.splitlines()[0] if err else "no verdict in solver output"
    return Verdict(ERROR, detail, wall_ms=wall)


@dataclass(frozen=True)
class VCResult:
    vc: object
    verdict: Verdict
    script: str = field(repr=False, default="")


@dataclass
class Report:
    results: list[VCResult] = field(default_factory=list)

    @property
    def all_proved(self) -> bool:
        return all(r.verdict.proved for r in self.results)

    def unproved(self) -> list[VCResult]:
        return [r for r in self.results if not r.verdict.proved]

    def counts(self) -> dict[str, int]:
        out = {PROVED: 0, REFUTED: 0, UNKNOWN: 0, ERROR: 0}
        for r in self.results:
            out[r.verdict.status] += 1
        return out


def check_all(vcs, env: Optional[TheoryEnv] = None,
              lemmas: Sequence[Lemma] = (),
              config: Optional[SolverConfig] = None,
              on_result: Optional[Callable[[VCResult], None]] = None
              ) -> Report:
    """Check every obligation; identical scripts are solved once.
    Results (and the callback) follow the input order."""
    env = env or builtin_theory()
    if config is None:
        config = SolverConfig(default_solver_command())

    scripts: list[tuple[object, str, Optional[str]]] = []
    for vc in vcs:
        try:
            scripts.append((vc, encode(vc, env, lemmas), None))
        except EncodeError as exc:
            scripts.append((vc, "", str(exc)))

    unique: dict[str, object] = {}
    report = Report()
    with ThreadPoolExecutor(max_workers=config.effective_jobs()) as pool:
        for _, script, err in scripts:
            if err is None and script not in unique:
                unique[script] = pool.submit(run_solver, script, config)
        for vc, script, err in scripts:
            if err is not None:
                verdict = Verdict(ERROR, err)
            else:
                verdict = unique[script].result()
            res = VCResult(vc, verdict, script)
            report.results.append(res)
            if on_result is not None:
                on_result(res)
    return report


def check_validity_batch(sequents, env: Optional[TheoryEnv] = None,
                         lemmas: Sequence[Lemma] = (),
                         config: Optional[SolverConfig] = None
                         ) -> list[Verdict]:
    """Many small validity questions in one solver process.

    `sequents` holds (antecedents, consequent, declarations) triples;
    each is checked inside a push/pop frame against a shared background.
    """
    env = env or builtin_theory()
    if config is None:
        config = SolverConfig(default_solver_command())
    all_exprs: list[M.Expr] = []
    all_decls: list[tuple[str, M.SemType]] = []
    for ants, consequent, decls in sequents:
        all_exprs.extend(ants)
        all_exprs.append(consequent)
        all_decls.extend(decls)
    lines, _ = _background(env, all_exprs, all_decls, lemmas)
    for ants, consequent, decls in sequents:
        lines.append("(push 1)")
        lines.extend(_declaration_lines(decls))
        enc = _Encoder(env)
        body = [f"(assert {enc.term(a)})" for a in ants]
        body.append(f"(assert (not {enc.term(consequent)}))")
        lines.extend(enc.aux)
        lines.extend(body)
        lines.append("(check-sat)")
        lines.append("(pop 1)")
    script = "\n".join(lines) + "\n"

    t0 = time.monotonic()
    try:
        proc = subprocess.run(
            list(config.command), input=script.encode(),
            capture_output=True, timeout=config.timeout_ms / 1000)
    except subprocess.TimeoutExpired:
        return [Verdict(UNKNOWN, "timeout")] * len(sequents)
    except OSError as exc:
        return [Verdict(ERROR, f"cannot run solver: {exc}")] * len(sequents)
    wall = int((time.monotonic() - t0) * 1000)
    verdicts: list[Verdict] = []
    for ln in proc.stdout.decode(errors="replace").splitlines():
        ln = ln.strip()
        if ln == "unsat":
            verdicts.append(Verdict(PROVED, wall_ms=wall))
        elif ln == "sat":
            verdicts.append(Verdict(REFUTED, wall_ms=wall))
        elif ln == "unknown":
            verdicts.append(Verdict(UNKNOWN, "solver returned unknown",
                                    wall_ms=wall))
    while len(verdicts) < len(sequents):
        verdicts.append(Verdict(ERROR, "missing verdict in solver output"))
    return verdicts[:len(sequents)]
