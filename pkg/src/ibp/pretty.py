"""Printers for expressions, statements and proof obligations.

`pretty` emits concrete syntax with minimal parentheses; parsing its
output yields a structurally equal expression, which the tests rely on.
"""

from __future__ import annotations

from . import model as M

# Binding strength; parent context passes the minimum strength a child
# may have without parentheses.
_ATOM = 100
_POSTFIX = 90
_NEG = 80
_MUL = 60
_ADD = 50
_CMP = 40
_NOT = 35
_AND = 30
_OR = 25
_IMP = 20
_IFF = 15
_QUANT = 5

_BIN_PREC = {
    "*": _MUL, "div": _MUL,
    "+": _ADD, "-": _ADD,
    "=": _CMP, "/=": _CMP, "<": _CMP, "<=": _CMP, ">": _CMP, ">=": _CMP,
    "and": _AND, "or": _OR, "=>": _IMP, "<=>": _IFF,
}

_TYPE_NAMES = {
    M.SemType.NAT: "nat", M.SemType.INT: "int",
    M.SemType.BOOL: "bool", M.SemType.VEC: "vector",
}


def pretty(e: M.Expr, prec: int = 0) -> str:
    text, my_prec = _render(e)
    if my_prec < prec:
        return f"({text})"
    return text


def _render(e: M.Expr) -> tuple[str, int]:
    if isinstance(e, M.IntLit):
        return str(e.value), _ATOM
    if isinstance(e, M.BoolLit):
        return ("true" if e.value else "false"), _ATOM
    if isinstance(e, M.Var):
        return e.name, _ATOM
    if isinstance(e, M.OldVar):
        return f"{e.name}_0", _ATOM
    if isinstance(e, M.UnaryOp):
        if e.op == "not":
            return f"not {pretty(e.operand, _NOT)}", _NOT
        return f"-{pretty(e.operand, _NEG + 1)}", _NEG
    if isinstance(e, M.BinOp):
        p = _BIN_PREC[e.op]
        if e.op == "=>":           # right associative
            left, right = p + 1, p
        elif e.op in M.COMPARISONS:  # non-associative
            left, right = p + 1, p + 1
        else:                      # left associative
            left, right = p, p + 1
        return f"{pretty(e.left, left)} {e.op} {pretty(e.right, right)}", p
    if isinstance(e, M.Ite):
        parts = [f"if {pretty(e.cond)} then {pretty(e.then)}"]
        other = e.other
        while isinstance(other, M.Ite):
            parts.append(f"elsif {pretty(other.cond)} then {pretty(other.then)}")
            other = other.other
        parts.append(f"else {pretty(other)} endif")
        return " ".join(parts), _ATOM
    if isinstance(e, M.ArrLen):
        return f"len({pretty(e.vec)})", _ATOM
    if isinstance(e, M.ArrGet):
        return f"{pretty(e.vec, _POSTFIX)}[{pretty(e.index)}]", _POSTFIX
    if isinstance(e, M.ArrSet):
        base = pretty(e.vec, _POSTFIX)
        return f"{base}[{pretty(e.index)} <- {pretty(e.value)}]", _POSTFIX
    if isinstance(e, M.App):
        args = ", ".join(pretty(a) for a in e.args)
        return f"{e.func}({args})", _ATOM
    if isinstance(e, M.Quant):
        body = pretty(e.body)
        ty = _TYPE_NAMES[e.var_type]
        return f"{e.kind} ({e.var}: {ty}): {body}", _QUANT
    raise TypeError(f"cannot print {e!r}")


def pretty_statement(s: M.Statement) -> str:
    if isinstance(s, M.Guard):
        return f"[{pretty(s.cond)}];"
    if isinstance(s, M.Assert):
        return f"{{{pretty(s.cond)}}};"
    if isinstance(s, M.Assign):
        return f"{s.target} := {pretty(s.value)};"
    if isinstance(s, M.Call):
        args = ", ".join(pretty(a) for a in s.args)
        return f"{s.proc}({args});"
    raise TypeError(f"cannot print {s!r}")


def pretty_body(body) -> str:
    return " ".join(pretty_statement(s) for s in body)


def pretty_transition(t: M.Transition) -> str:
    return f"{t.source} -> {t.target}: {pretty_body(t.body)}"


def render_sequent(vc, indent: str = "  ") -> str:
    """Multi-line rendering of one proof obligation.

    Antecedents are numbered [-1], [-2], ... in listing order, followed
    by the turnstile line.  Works on anything with `antecedents` and
    `consequent` attributes.
    """
    lines = []
    n = len(vc.antecedents)
    width = len(f"[-{n}]") if n else 0
    for i, a in enumerate(vc.antecedents, start=1):
        tag = f"[-{i}]".ljust(width)
        lines.append(f"{indent}{tag} {pretty(a)}")
    lines.append(f"{indent}{'|-'.rjust(width) if width else '|-'} {pretty(vc.consequent)}")
    return "\n".join(lines)
