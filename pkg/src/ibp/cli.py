"""Command line front end.

    ibp check FILE       generate obligations and run the solver
    ibp vcs FILE         print obligations as sequents (no solver)
    ibp run FILE         execute a procedure with runtime checking
    ibp export-dot FILE  render the diagram structure for graphviz

Exit codes: 0 all good (warnings allowed), 1 unproved obligations or a
runtime violation, 2 errors (bad input, solver failures), 3 usage.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path
from typing import Optional

from . import model as M
from . import analysis, interp, pretty, smt, vcgen
from .parser import parse_context, parse_theory_module
from .prelude import TheoryEnv, builtin_theory, load_theory, resolve_strategy
from .source import Diagnostic, has_errors


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(3)


def _print_diags(diags) -> None:
    for d in diags:
        print(d, file=sys.stderr)


def _load(path_str: str):
    """Parse, resolve imports, analyze.  Returns (ctx, theory, lemmas)
    or None after printing diagnostics / errors."""
    path = Path(path_str)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"{path_str}: error: {exc}", file=sys.stderr)
        return None

    result = parse_context(text, str(path))
    if isinstance(result, list):
        _print_diags(result)
        return None
    ctx = result

    theory = builtin_theory()
    for name in ctx.imports:
        tpath = path.parent / f"{name}.ibt"
        try:
            ttext = tpath.read_text()
        except OSError:
            _print_diags([Diagnostic(
                "error", "RESOLVE001",
                f"theory {name!r} not found (expected {tpath})", ctx.span)])
            return None
        loaded = load_theory(ttext, str(tpath), theory)
        if isinstance(loaded, list):
            _print_diags(loaded)
            return None
        theory = loaded

    diags = analysis.analyze(ctx, theory)
    _print_diags(diags)
    if has_errors(diags):
        return None
    lemmas, _ = resolve_strategy(ctx.strategy_lemmas, theory)
    return ctx, theory, lemmas


def _select_vcs(ctx, theory, args) -> list[vcgen.VC]:
    vcs = vcgen.generate_all(ctx, theory, proc=args.proc)
    if getattr(args, "no_termination", False):
        vcs = [v for v in vcs if v.kind not in ("termination", "recursion")]
    if getattr(args, "no_liveness", False):
        vcs = [v for v in vcs if v.kind != "liveness"]
    if getattr(args, "id", None):
        vcs = [v for v in vcs if args.id in v.id]
    return vcs


def _solver_config(args) -> smt.SolverConfig:
    if args.solver:
        command = shlex.split(args.solver)
    else:
        command = smt.default_solver_command()
    return smt.SolverConfig(command, timeout_ms=args.timeout, jobs=args.jobs)


def _dump_name(vc_id: str) -> str:
    return vc_id.replace("/", "_").replace("#", "") + ".smt2"


def cmd_check(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return 2
    ctx, theory, lemmas = loaded
    vcs = _select_vcs(ctx, theory, args)
    try:
        config = _solver_config(args)
    except smt.SolverNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    dump_dir: Optional[Path] = None
    if args.dump_smt:
        dump_dir = Path(args.dump_smt)
        dump_dir.mkdir(parents=True, exist_ok=True)

    def show(res: smt.VCResult) -> None:
        if dump_dir is not None and res.script:
            (dump_dir / _dump_name(res.vc.id)).write_text(res.script)
        v = res.verdict
        if args.format == "jsonl":
            print(json.dumps({"id": res.vc.id, "kind": res.vc.kind,
                              "status": v.status, "detail": v.detail}))
            return
        print(f"{v.status.upper():8} {res.vc.id}  [{v.wall_ms}ms]")
        if v.status != smt.PROVED and v.detail:
            detail = v.detail
            if len(detail) > 2000:
                detail = detail[:2000] + " ..."
            for line in detail.splitlines():
                print(f"         {line}")

    report = smt.check_all(vcs, theory, lemmas, config, on_result=show)
    counts = report.counts()
    if args.format != "jsonl":
        total = len(report.results)
        print(f"{total} obligations: {counts[smt.PROVED]} proved, "
              f"{counts[smt.REFUTED]} refuted, {counts[smt.UNKNOWN]} unknown, "
              f"{counts[smt.ERROR]} errors")
    if counts[smt.ERROR]:
        return 2
    if not report.all_proved:
        return 1
    return 0


def cmd_vcs(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return 2
    ctx, theory, _ = loaded
    vcs = _select_vcs(ctx, theory, args)
    for vc in vcs:
        if args.format == "jsonl":
            print(json.dumps({
                "id": vc.id, "kind": vc.kind, "procedure": vc.procedure,
                "situation": vc.situation, "transition": vc.transition,
                "antecedents": [pretty.pretty(a) for a in vc.antecedents],
                "consequent": pretty.pretty(vc.consequent),
                "declarations": {n: t.value for n, t in vc.declarations},
            }))
        else:
            print(f"== {vc.id}")
            if vc.description:
                print(f"   {vc.description}")
            print(pretty.render_sequent(vc))
            print()
    return 0


def cmd_run(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return 2
    ctx, theory, _ = loaded
    proc = args.proc or (ctx.procedures[0].name if ctx.procedures else None)
    if proc is None:
        print("error: no procedure to run", file=sys.stderr)
        return 2

    raw = args.input or "{}"
    if raw.startswith("@"):
        try:
            raw = Path(raw[1:]).read_text()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    try:
        inputs = json.loads(raw)
        if not isinstance(inputs, dict):
            raise ValueError("inputs must be a JSON object")
    except ValueError as exc:
        print(f"error: bad --input: {exc}", file=sys.stderr)
        return 2

    try:
        result = interp.run(ctx, proc, inputs, theory=theory,
                            policy=args.policy, seed=args.seed,
                            max_steps=args.max_steps, trace=args.trace)
    except interp.Violation as exc:
        kind = type(exc).__name__
        print(f"violation[{kind}]: {exc}", file=sys.stderr)
        return 1
    except interp.EvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    def clean(v):
        return list(v) if isinstance(v, tuple) else v

    payload = {"procedure": result.procedure,
               "outputs": {k: clean(v) for k, v in result.outputs.items()},
               "steps": result.steps,
               "final_situation": result.final_situation}
    if args.format == "jsonl":
        if args.trace:
            payload["trace"] = json.loads(result.trace_json())
        print(json.dumps(payload))
    else:
        print(f"{result.procedure}: reached {result.final_situation} "
              f"in {result.steps} steps")
        for k, v in payload["outputs"].items():
            print(f"  {k} = {v}")
        if args.trace:
            print(result.trace_text())
    return 0


# ---------------------------------------------------------------------------
# Graphviz export
# ---------------------------------------------------------------------------

def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _situation_label(s: M.Situation) -> str:
    parts = [s.name]
    parts.extend(pretty.pretty(inv) for inv in s.invariants)
    if s.variant is not None:
        parts.append(f"variant {pretty.pretty(s.variant)}")
    return "\\n".join(_dot_escape(p) for p in parts)


def _emit_situation(s: M.Situation, proc: str, lines: list[str],
                    indent: str) -> None:
    node = f'"{proc}.{s.name}"'
    style = ""
    if s.kind is M.SituationKind.PRECONDITION:
        style = ", penwidth=3"
    elif s.kind is M.SituationKind.POSTCONDITION:
        style = ", peripheries=2"
    if s.children:
        lines.append(f'{indent}subgraph "cluster_{proc}_{s.name}" {{')
        lines.append(f'{indent}  label="{_situation_label(s)}";')
        lines.append(f'{indent}  style=rounded;')
        lines.append(f'{indent}  {node} [label="{_dot_escape(s.name)}"'
                     f'{style}];')
        for c in s.children:
            _emit_situation(c, proc, lines, indent + "  ")
        lines.append(f"{indent}}}")
    else:
        lines.append(f'{indent}{node} [label="{_situation_label(s)}"'
                     f'{style}];')


def export_dot(ctx: M.VerificationContext, proc: Optional[str] = None) -> str:
    lines = ["digraph diagram {",
             "  rankdir=TB;",
             "  node [shape=box, style=rounded, fontname=monospace];",
             "  edge [fontname=monospace, fontsize=10];"]
    for p in ctx.procedures:
        if proc is not None and p.name != proc:
            continue
        lines.append(f'  subgraph "cluster_{p.name}" {{')
        lines.append(f'    label="{_dot_escape(p.name)}";')
        for s in p.situations:
            _emit_situation(s, p.name, lines, "    ")
        for t in p.transitions:
            label_lines = [t.label]
            label_lines.extend(pretty.pretty_statement(st) for st in t.body)
            label = "\\l".join(_dot_escape(x) for x in label_lines) + "\\l"
            lines.append(f'    "{p.name}.{t.source}" -> "{p.name}.{t.target}"'
                         f' [label="{label}"];')
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_export_dot(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return 2
    ctx, _, _ = loaded
    dot = export_dot(ctx, proc=args.proc)
    if args.output:
        Path(args.output).write_text(dot)
    else:
        sys.stdout.write(dot)
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="ibp", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def common(p, solver=False):
        p.add_argument("file", help="program file (.ibp)")
        p.add_argument("--proc", help="restrict to one procedure")
        p.add_argument("--format", choices=("human", "jsonl"),
                       default="human")
        if solver:
            p.add_argument("--no-termination", action="store_true",
                           help="skip termination and recursion obligations")
            p.add_argument("--no-liveness", action="store_true",
                           help="skip liveness obligations")
            p.add_argument("--id", help="only obligations whose id "
                           "contains this substring")

    pc = sub.add_parser("check", help="verify all obligations")
    common(pc, solver=True)
    pc.add_argument("--timeout", type=int, default=60_000, metavar="MS",
                    help="per-obligation solver timeout (default 60000)")
    pc.add_argument("--solver", help="solver command reading SMT-LIB "
                    "on stdin (default: bundled adapter or IBP_SOLVER)")
    pc.add_argument("--jobs", type=int, default=0,
                    help="parallel solver processes (default: cpu count)")
    pc.add_argument("--dump-smt", metavar="DIR",
                    help="write each obligation's script into DIR")
    pc.set_defaults(fn=cmd_check)

    pv = sub.add_parser("vcs", help="print obligations without solving")
    common(pv, solver=True)
    pv.set_defaults(fn=cmd_vcs)

    pr = sub.add_parser("run", help="execute with runtime checking")
    pr.add_argument("file", help="program file (.ibp)")
    pr.add_argument("--proc", help="procedure to run (default: first)")
    pr.add_argument("--input", help="JSON object of parameter values, "
                    "or @file")
    pr.add_argument("--policy", choices=("first", "random"), default="first")
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--max-steps", type=int, default=1_000_000)
    pr.add_argument("--trace", action="store_true")
    pr.add_argument("--format", choices=("human", "jsonl"), default="human")
    pr.set_defaults(fn=cmd_run)

    pd = sub.add_parser("export-dot", help="graphviz rendering")
    pd.add_argument("file", help="program file (.ibp)")
    pd.add_argument("--proc", help="restrict to one procedure")
    pd.add_argument("-o", "--output", help="write to file instead of stdout")
    pd.set_defaults(fn=cmd_export_dot)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
