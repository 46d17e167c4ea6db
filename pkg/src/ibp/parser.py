"""Parser for invariant diagram programs (.ibp) and theories (.ibt).

Hand-written recursive descent over a regex tokenizer.  `parse_context`
returns a resolved `VerificationContext` or a list of diagnostics; it
never raises on bad input.  Branching transition declarations are
desugared here into linear transitions that share their prefix.

Identifiers ending in `_<digits>` are reserved: `x_0` in an expression
denotes the entry value of the valres parameter `x`, every other use is
rejected so that generated names (`a_1`, ...) can never collide.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import model as M
from .source import Diagnostic, SourceSpan

__all__ = [
    "SourceSpan", "Diagnostic", "ParseError",
    "parse_context", "parse_expr", "parse_theory_module",
    "RESERVED_RE", "KEYWORDS",
]

KEYWORDS = frozenset("""
    context theory import strategy lemmas const procedure pre post
    situation variant var transition from to branch call valres recursion
    def opaque uninterpreted lemma trigger
    forall exists not and or div if then elsif else endif true false
    nat int bool vector index upto below len
""".split())

RESERVED_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)_([0-9]+)$")

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t\r\n]+)
    | (?P<lcomment>//[^\n]*)
    | (?P<bcomment>/\*.*?\*/)
    | (?P<num>[0-9]+)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op><=>|=>|:=|<-|<=|>=|/=|!=|[()\[\]{},;:+\-*=<>])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "name" | "op" | "eof"
    text: str
    line: int
    col: int

    def span(self, file: str) -> SourceSpan:
        end_col = self.col + max(len(self.text), 1)
        return SourceSpan(file, self.line, self.col, self.line, end_col)


class ParseError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


def _tokenize(text: str, file: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(Diagnostic(
                "error", "PARSE001", f"unexpected character {text[pos]!r}",
                SourceSpan(file, line, col, line, col + 1)))
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "bcomment" and not lexeme.endswith("*/"):
            raise ParseError(Diagnostic(
                "error", "PARSE001", "unterminated block comment",
                SourceSpan(file, line, col, line, col + 2)))
        if kind not in ("ws", "lcomment", "bcomment"):
            tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


_TYPE_NAMES = {"nat": M.SemType.NAT, "int": M.SemType.INT,
               "bool": M.SemType.BOOL, "vector": M.SemType.VEC}


@dataclass(frozen=True)
class BoundType:
    """A parameter/quantifier type, possibly with a range constraint.

    `index(a)`, `upto(e)` and `below(e)` are sugar for `nat` plus the
    constraint `x < len(a)`, `x <= e`, `x < e` on the declared name.
    """
    base: M.SemType
    constraint_op: Optional[str] = None   # "<" | "<="
    constraint_rhs: Optional[M.Expr] = None

    def constraint_for(self, name: str) -> Optional[M.Expr]:
        if self.constraint_op is None:
            return None
        return M.BinOp(self.constraint_op, M.Var(name), self.constraint_rhs)


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.tokens = _tokenize(text, file)
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("name", "op")

    def at_name(self) -> bool:
        return self.tok.kind == "name" and self.tok.text not in KEYWORDS

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self._describe()}")
        return self.advance()

    def _describe(self) -> str:
        t = self.tok
        return "end of input" if t.kind == "eof" else repr(t.text)

    def fail(self, message: str, code: str = "PARSE001", token: Token | None = None):
        t = token or self.tok
        raise ParseError(Diagnostic("error", code, message, t.span(self.file)))

    def span_from(self, start: Token) -> SourceSpan:
        last = self.tokens[max(self.i - 1, 0)]
        return start.span(self.file).merge(last.span(self.file))

    def ident(self, what: str = "identifier") -> Token:
        if not self.at_name():
            self.fail(f"expected {what}, found {self._describe()}")
        t = self.advance()
        return t

    def decl_name(self, what: str) -> str:
        """Identifier at a declaration site; `_<digits>` suffixes are reserved."""
        t = self.ident(what)
        if RESERVED_RE.match(t.text):
            self.fail(f"identifier {t.text!r} is reserved"
                      " (names ending in _<digits> are generated)",
                      "PARSE002", t)
        return t.text

    # -- types -------------------------------------------------------------

    def parse_bound_type(self) -> BoundType:
        t = self.tok
        if t.text in _TYPE_NAMES:
            self.advance()
            base = _TYPE_NAMES[t.text]
            if base is M.SemType.VEC and self.accept("["):
                elem = self.tok
                if elem.text != "int":
                    self.fail("only vector[int] is supported")
                self.advance()
                self.expect("]")
            return BoundType(base)
        if t.text == "index":
            self.advance()
            self.expect("(")
            vec = self.parse_expression()
            self.expect(")")
            return BoundType(M.SemType.NAT, "<", M.ArrLen(vec, span=vec.span))
        if t.text in ("upto", "below"):
            self.advance()
            self.expect("(")
            bound = self.parse_expression()
            self.expect(")")
            op = "<=" if t.text == "upto" else "<"
            return BoundType(M.SemType.NAT, op, bound)
        self.fail(f"expected a type, found {self._describe()}")

    def parse_plain_type(self) -> M.SemType:
        bt = self.parse_bound_type()
        if bt.constraint_op is not None:
            self.fail("range types are only allowed on quantifier and"
                      " theory-definition parameters")
        return bt.base

    # -- expressions ---------------------------------------------------------
    # precedence: <=> | => | or | and | not | comparison | + - | * div | unary -

    def parse_expression(self) -> M.Expr:
        return self.parse_iff()

    def parse_iff(self) -> M.Expr:
        start = self.tok
        e = self.parse_implies()
        while self.at("<=>"):
            self.advance()
            rhs = self.parse_implies()
            e = M.BinOp("<=>", e, rhs, span=self.span_from(start))
        return e

    def parse_implies(self) -> M.Expr:
        start = self.tok
        e = self.parse_or()
        if self.at("=>"):
            self.advance()
            rhs = self.parse_implies()  # right associative
            return M.BinOp("=>", e, rhs, span=self.span_from(start))
        return e

    def parse_or(self) -> M.Expr:
        start = self.tok
        e = self.parse_and()
        while self.at("or"):
            self.advance()
            e = M.BinOp("or", e, self.parse_and(), span=self.span_from(start))
        return e

    def parse_and(self) -> M.Expr:
        start = self.tok
        e = self.parse_not()
        while self.at("and"):
            self.advance()
            e = M.BinOp("and", e, self.parse_not(), span=self.span_from(start))
        return e

    def parse_not(self) -> M.Expr:
        if self.at("not"):
            start = self.advance()
            operand = self.parse_not()
            return M.UnaryOp("not", operand, span=self.span_from(start))
        return self.parse_comparison()

    def parse_comparison(self) -> M.Expr:
        start = self.tok
        e = self.parse_sum()
        t = self.tok.text
        if t in ("=", "/=", "!=", "<", "<=", ">", ">="):
            self.advance()
            op = "/=" if t == "!=" else t
            rhs = self.parse_sum()
            e = M.BinOp(op, e, rhs, span=self.span_from(start))
            if self.tok.text in ("=", "/=", "!=", "<", "<=", ">", ">="):
                self.fail("comparison operators do not chain; parenthesize")
        return e

    def parse_sum(self) -> M.Expr:
        start = self.tok
        e = self.parse_term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            e = M.BinOp(op, e, self.parse_term(), span=self.span_from(start))
        return e

    def parse_term(self) -> M.Expr:
        start = self.tok
        e = self.parse_factor()
        while self.tok.text in ("*", "div"):
            op = self.advance().text
            e = M.BinOp(op, e, self.parse_factor(), span=self.span_from(start))
        return e

    def parse_factor(self) -> M.Expr:
        if self.at("-"):
            start = self.advance()
            operand = self.parse_factor()
            return M.UnaryOp("-", operand, span=self.span_from(start))
        return self.parse_postfix()

    def parse_postfix(self) -> M.Expr:
        start = self.tok
        e = self.parse_atom()
        while self.at("["):
            self.advance()
            index = self.parse_expression()
            if self.accept("<-"):
                value = self.parse_expression()
                self.expect("]")
                e = M.ArrSet(e, index, value, span=self.span_from(start))
            else:
                self.expect("]")
                e = M.ArrGet(e, index, span=self.span_from(start))
        return e

    def parse_atom(self) -> M.Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return M.IntLit(int(t.text), span=t.span(self.file))
        if t.text == "true":
            self.advance()
            return M.BoolLit(True, span=t.span(self.file))
        if t.text == "false":
            self.advance()
            return M.BoolLit(False, span=t.span(self.file))
        if t.text == "(":
            self.advance()
            e = self.parse_expression()
            self.expect(")")
            return e
        if t.text in ("forall", "exists"):
            return self.parse_quantifier()
        if t.text == "if":
            return self.parse_if()
        if t.text == "len":
            self.advance()
            self.expect("(")
            vec = self.parse_expression()
            self.expect(")")
            return M.ArrLen(vec, span=self.span_from(t))
        if self.at_name():
            self.advance()
            if self.at("("):
                self.advance()
                args: list[M.Expr] = []
                if not self.at(")"):
                    args.append(self.parse_expression())
                    while self.accept(","):
                        args.append(self.parse_expression())
                self.expect(")")
                return M.App(t.text, tuple(args), span=self.span_from(t))
            m = RESERVED_RE.match(t.text)
            if m:
                if m.group(2) == "0":
                    return M.OldVar(m.group(1), span=t.span(self.file))
                self.fail(f"identifier {t.text!r} is reserved"
                          " (names ending in _<digits> are generated)",
                          "PARSE002", t)
            return M.Var(t.text, span=t.span(self.file))
        self.fail(f"expected an expression, found {self._describe()}")

    def parse_quantifier(self) -> M.Expr:
        start = self.advance()  # forall | exists
        kind = start.text
        self.expect("(")
        groups: list[tuple[list[str], BoundType]] = []
        while True:
            names = [self.decl_name("quantifier variable")]
            while self.accept(","):
                names.append(self.decl_name("quantifier variable"))
                if self.at(":"):
                    break
            self.expect(":")
            groups.append((names, self.parse_bound_type()))
            if not self.accept(","):
                break
        self.expect(")")
        self.expect(":")
        body = self.parse_expression()
        span = self.span_from(start)

        # Desugar right to left: each variable becomes one quantifier,
        # range constraints guard the body.
        e = body
        flat: list[tuple[str, BoundType]] = []
        for names, bt in groups:
            flat.extend((n, bt) for n in names)
        for name, bt in reversed(flat):
            constraint = bt.constraint_for(name)
            if constraint is not None:
                if kind == "forall":
                    e = M.BinOp("=>", constraint, e)
                else:
                    e = M.BinOp("and", constraint, e)
            e = M.Quant(kind, name, bt.base, e, span=span)
        return e

    def parse_if(self) -> M.Expr:
        start = self.expect("if")
        arms: list[tuple[M.Expr, M.Expr]] = []
        cond = self.parse_expression()
        self.expect("then")
        arms.append((cond, self.parse_expression()))
        while self.accept("elsif"):
            c = self.parse_expression()
            self.expect("then")
            arms.append((c, self.parse_expression()))
        self.expect("else")
        other = self.parse_expression()
        self.expect("endif")
        span = self.span_from(start)
        for c, v in reversed(arms):
            other = M.Ite(c, v, other, span=span)
        return other

    # -- statements and transitions ------------------------------------------

    def parse_statement(self) -> M.Statement:
        t = self.tok
        if t.text == "[":
            self.advance()
            cond = self.parse_expression()
            self.expect("]")
            self.expect(";")
            return M.Guard(cond, span=self.span_from(t))
        if t.text == "{":
            self.advance()
            cond = self.parse_expression()
            self.expect("}")
            self.expect(";")
            return M.Assert(cond, span=self.span_from(t))
        if t.text == "call":
            self.advance()
            name = self.ident("procedure name").text
            stmt = self.parse_call_tail(name, t)
            return stmt
        if self.at_name():
            name = self.advance().text
            if self.at("("):
                return self.parse_call_tail(name, t)
            self.expect(":=")
            m = RESERVED_RE.match(name)
            if m:
                self.fail(f"cannot assign to reserved name {name!r}", "PARSE002", t)
            value = self.parse_expression()
            self.expect(";")
            return M.Assign(name, value, span=self.span_from(t))
        self.fail(f"expected a statement, found {self._describe()}")

    def parse_call_tail(self, name: str, start: Token) -> M.Call:
        self.expect("(")
        args: list[M.Expr] = []
        if not self.at(")"):
            args.append(self.parse_expression())
            while self.accept(","):
                args.append(self.parse_expression())
        self.expect(")")
        self.expect(";")
        return M.Call(name, tuple(args), span=self.span_from(start))

    def parse_body(self) -> list[M.Statement]:
        self.expect("{")
        stmts: list[M.Statement] = []
        while not self.at("}"):
            stmts.append(self.parse_statement())
        self.expect("}")
        return stmts

    def parse_transition(self, index: int) -> list[M.Transition]:
        """One `transition` declaration, desugared to linear transitions."""
        start = self.expect("transition")
        source: Optional[str] = None
        if self.accept("from"):
            source = self.ident("situation name").text

        leaves: list[tuple[str, list[M.Statement], SourceSpan]] = []

        def tail(prefix: list[M.Statement]) -> None:
            if self.accept("to"):
                target_tok = self.ident("situation name")
                body = self.parse_body()
                leaves.append((target_tok.text, prefix + body,
                               self.span_from(start)))
                return
            shared = prefix
            if self.at("{"):
                shared = prefix + self.parse_body()
            self.expect("branch")
            self.expect("{")
            if self.at("}"):
                self.fail("empty branch block")
            while not self.at("}"):
                tail(list(shared))
            self.expect("}")

        tail([])
        self.accept(";")

        group_head = tuple(self._shared_head_guards([b for _, b, _ in leaves]))
        out = []
        branch_no = None if len(leaves) == 1 else 0
        for target, body, span in leaves:
            out.append(M.Transition(
                source=source or "", target=target, body=tuple(body),
                index=index, branch=branch_no, group_head=group_head,
                span=span))
            if branch_no is not None:
                branch_no += 1
        return out

    @staticmethod
    def _shared_head_guards(bodies: list[list[M.Statement]]) -> list[M.Expr]:
        """Guard conjuncts at the head of the statement prefix common to
        every leaf of one declaration."""
        if not bodies:
            return []
        shared = 0
        first = bodies[0]
        while all(len(b) > shared and b[shared] == first[shared] for b in bodies):
            shared += 1
        return M.head_guards(tuple(first[:shared]))

    # -- situations ------------------------------------------------------------

    def parse_situation(self, kind: M.SituationKind) -> M.Situation:
        start = self.advance()  # pre | post | situation
        if self.at_name():
            name = self.decl_name("situation name")
        else:
            name = {"pre": "Pre", "post": "Post",
                    "situation": None}[start.text]
            if name is None:
                self.fail("expected situation name")
        self.expect("{")
        invariants: list[M.Expr] = []
        variant: Optional[M.Expr] = None
        children: list[M.Situation] = []
        while not self.at("}"):
            if self.at("variant"):
                vt = self.advance()
                if kind is not M.SituationKind.INTERMEDIATE:
                    self.fail("only intermediate situations take a variant",
                              token=vt)
                if variant is not None:
                    self.fail("duplicate variant clause", token=vt)
                variant = self.parse_expression()
                self.expect(";")
            elif self.at("situation"):
                if kind is not M.SituationKind.INTERMEDIATE:
                    self.fail("pre/post situations cannot nest")
                children.append(self.parse_situation(M.SituationKind.INTERMEDIATE))
            else:
                invariants.append(self.parse_expression())
                self.expect(";")
        self.expect("}")
        return M.Situation(name, kind, tuple(invariants), variant,
                           tuple(children), span=self.span_from(start))

    # -- procedures ---------------------------------------------------------

    def parse_procedure(self) -> M.Procedure:
        start = self.expect("procedure")
        name = self.decl_name("procedure name")
        self.expect("(")
        params: list[M.Param] = []
        if not self.at(")"):
            params.extend(self.parse_param_group())
            while self.accept(","):
                params.extend(self.parse_param_group())
        self.expect(")")
        self.expect("{")

        situations: list[M.Situation] = []
        locals_: list[M.Local] = []
        transitions: list[M.Transition] = []
        recursion_variant: Optional[M.Expr] = None
        index = 0
        while not self.at("}"):
            if self.at("pre"):
                situations.append(self.parse_situation(M.SituationKind.PRECONDITION))
            elif self.at("post"):
                situations.append(self.parse_situation(M.SituationKind.POSTCONDITION))
            elif self.at("situation"):
                situations.append(self.parse_situation(M.SituationKind.INTERMEDIATE))
            elif self.at("var"):
                self.advance()
                names = [self.decl_name("variable name")]
                while self.accept(","):
                    names.append(self.decl_name("variable name"))
                self.expect(":")
                ty = self.parse_plain_type()
                self.expect(";")
                locals_.extend(M.Local(n, ty) for n in names)
            elif self.at("transition"):
                transitions.extend(self.parse_transition(index))
                index += 1
            elif self.at("recursion"):
                rt = self.advance()
                self.expect("variant")
                if recursion_variant is not None:
                    self.fail("duplicate recursion variant", token=rt)
                recursion_variant = self.parse_expression()
                self.expect(";")
            else:
                self.fail(f"expected a procedure item, found {self._describe()}")
        self.expect("}")

        return M.Procedure(
            name=name, params=tuple(params), locals=tuple(locals_),
            situations=tuple(situations), transitions=tuple(transitions),
            recursion_variant=recursion_variant, span=self.span_from(start))

    def parse_param_group(self) -> list[M.Param]:
        valres = self.accept("valres")
        names = [self.decl_name("parameter name")]
        while self.accept(","):
            names.append(self.decl_name("parameter name"))
        self.expect(":")
        ty = self.parse_plain_type()
        return [M.Param(n, ty, valres) for n in names]

    # -- contexts -------------------------------------------------------------

    def parse_context(self) -> M.VerificationContext:
        start = self.expect("context")
        name = self.decl_name("context name")
        self.expect("{")
        imports: list[str] = []
        strategy: list[str] = []
        constants: list[M.Param] = []
        procedures: list[M.Procedure] = []
        while not self.at("}"):
            if self.at("import"):
                self.advance()
                imports.append(self.ident("theory name").text)
                while self.accept(","):
                    imports.append(self.ident("theory name").text)
                self.expect(";")
            elif self.at("strategy"):
                self.advance()
                self.expect("lemmas")
                strategy.append(self.ident("lemma name").text)
                while self.accept(","):
                    strategy.append(self.ident("lemma name").text)
                self.expect(";")
            elif self.at("const"):
                self.advance()
                cname = self.decl_name("constant name")
                self.expect(":")
                ty = self.parse_plain_type()
                self.expect(";")
                constants.append(M.Param(cname, ty))
            elif self.at("procedure"):
                procedures.append(self.parse_procedure())
            else:
                self.fail(f"expected a context item, found {self._describe()}")
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail(f"unexpected input after context: {self._describe()}")
        return M.VerificationContext(
            name=name, constants=tuple(constants), imports=tuple(imports),
            strategy_lemmas=tuple(strategy), procedures=tuple(procedures),
            span=self.span_from(start))


# ---------------------------------------------------------------------------
# Name resolution
# ---------------------------------------------------------------------------

def _resolve(ctx: M.VerificationContext, file: str) -> list[Diagnostic]:
    """Structural checks that need the whole context."""
    diags: list[Diagnostic] = []

    def err(code: str, msg: str, span=None):
        diags.append(Diagnostic("error", code, msg, span))

    proc_names: dict[str, M.Procedure] = {}
    for proc in ctx.procedures:
        if proc.name in proc_names:
            err("RESOLVE002", f"duplicate procedure {proc.name!r}", proc.span)
        proc_names[proc.name] = proc

    new_procs: list[M.Procedure] = []
    for proc in ctx.procedures:
        situations = {}
        for s in proc.all_situations():
            if s.name in situations:
                err("RESOLVE002",
                    f"{proc.name}: duplicate situation {s.name!r}", s.span)
            situations[s.name] = s

        pres = [s for s in proc.all_situations()
                if s.kind is M.SituationKind.PRECONDITION]
        if len(pres) != 1:
            err("RESOLVE003",
                f"{proc.name}: needs exactly one precondition, found {len(pres)}",
                proc.span)
        if not proc.postconditions():
            err("RESOLVE003", f"{proc.name}: has no postcondition", proc.span)

        declared = {p.name for p in proc.params} | {v.name for v in proc.locals} \
            | {c.name for c in ctx.constants}
        seen: set[str] = set()
        for p in list(proc.params) + list(proc.locals):
            if p.name in seen:
                err("RESOLVE002",
                    f"{proc.name}: duplicate variable {p.name!r}", p.span)
            seen.add(p.name)

        # postconditions may not mention locals: they describe the caller's view
        local_names = {v.name for v in proc.locals}
        for s in proc.postconditions():
            for inv in s.invariants:
                bad = M.free_vars(inv) & local_names
                if bad:
                    err("RESOLVE003",
                        f"{proc.name}/{s.name}: postcondition mentions "
                        f"local variable(s) {', '.join(sorted(bad))}",
                        inv.span)

        default_src = pres[0].name if len(pres) == 1 else None
        fixed: list[M.Transition] = []
        for t in proc.transitions:
            src = t.source or default_src
            if src is None:
                err("RESOLVE001",
                    f"{proc.name}: transition has no source and the procedure "
                    "has no unique precondition", t.span)
                continue
            if src not in situations:
                err("RESOLVE001",
                    f"{proc.name}: unknown source situation {src!r}", t.span)
            elif situations[src].kind is M.SituationKind.POSTCONDITION:
                err("RESOLVE003",
                    f"{proc.name}: transition out of postcondition {src!r}",
                    t.span)
            if t.target not in situations:
                err("RESOLVE001",
                    f"{proc.name}: unknown target situation {t.target!r}", t.span)
            elif situations[t.target].kind is M.SituationKind.PRECONDITION:
                err("RESOLVE003",
                    f"{proc.name}: transition into precondition {t.target!r}",
                    t.span)
            for stmt in t.body:
                if isinstance(stmt, M.Assign) and stmt.target not in declared:
                    err("RESOLVE001",
                        f"{proc.name}: assignment to undeclared variable "
                        f"{stmt.target!r}", stmt.span)
                if isinstance(stmt, M.Call):
                    callee = proc_names.get(stmt.proc)
                    if callee is None:
                        err("RESOLVE001",
                            f"{proc.name}: call to unknown procedure "
                            f"{stmt.proc!r}", stmt.span)
                        continue
                    if len(stmt.args) != len(callee.params):
                        err("RESOLVE003",
                            f"{proc.name}: call to {stmt.proc} takes "
                            f"{len(callee.params)} argument(s), got "
                            f"{len(stmt.args)}", stmt.span)
                        continue
                    for arg, cp in zip(stmt.args, callee.params):
                        if cp.valres and not isinstance(arg, M.Var):
                            err("RESOLVE003",
                                f"{proc.name}: argument for valres parameter "
                                f"{cp.name!r} must be a variable", stmt.span)
            fixed.append(M.Transition(src or t.source, t.target, t.body,
                                      t.index, t.branch, t.group_head,
                                      span=t.span))
        if len(fixed) == len(proc.transitions):
            new_procs.append(M.Procedure(
                proc.name, proc.params, proc.locals, proc.situations,
                tuple(fixed), proc.recursion_variant, span=proc.span))
        else:
            new_procs.append(proc)

    if not diags:
        object.__setattr__(ctx, "procedures", tuple(new_procs))
    return diags


# ---------------------------------------------------------------------------
# Theories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoryDeclParam:
    name: str
    type: BoundType


@dataclass(frozen=True)
class TheoryDef:
    name: str
    params: tuple[TheoryDeclParam, ...]
    result: M.SemType
    body: Optional[M.Expr]        # None for uninterpreted symbols
    opaque: bool = False
    span: Optional[SourceSpan] = None


@dataclass(frozen=True)
class TheoryLemma:
    name: str
    statement: M.Expr
    span: Optional[SourceSpan] = None


@dataclass(frozen=True)
class TheoryTrigger:
    lemma: str
    terms: tuple[M.Expr, ...]
    span: Optional[SourceSpan] = None


@dataclass(frozen=True)
class TheoryModule:
    name: str
    defs: tuple[TheoryDef, ...]
    lemmas: tuple[TheoryLemma, ...]
    triggers: tuple[TheoryTrigger, ...]


class _TheoryParser(_Parser):
    def parse_theory(self) -> TheoryModule:
        self.expect("theory")
        name = self.decl_name("theory name")
        self.expect("{")
        defs: list[TheoryDef] = []
        lemmas: list[TheoryLemma] = []
        triggers: list[TheoryTrigger] = []
        while not self.at("}"):
            if self.at("def") or self.at("opaque"):
                start = self.tok
                opaque = self.accept("opaque")
                self.expect("def")
                defs.append(self._parse_def(opaque, start))
            elif self.at("uninterpreted"):
                start = self.advance()
                dname = self.decl_name("function name")
                params = self._parse_def_params()
                self.expect(":")
                result = self.parse_plain_type()
                self.expect(";")
                defs.append(TheoryDef(dname, params, result, None,
                                      span=self.span_from(start)))
            elif self.at("lemma"):
                start = self.advance()
                lname = self.decl_name("lemma name")
                self.expect(":")
                stmt = self.parse_expression()
                self.expect(";")
                lemmas.append(TheoryLemma(lname, stmt, self.span_from(start)))
            elif self.at("trigger"):
                start = self.advance()
                lname = self.ident("lemma name").text
                self.expect(":")
                terms = [self.parse_expression()]
                while self.accept(","):
                    terms.append(self.parse_expression())
                self.expect(";")
                triggers.append(TheoryTrigger(lname, tuple(terms),
                                              self.span_from(start)))
            else:
                self.fail(f"expected a theory item, found {self._describe()}")
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail(f"unexpected input after theory: {self._describe()}")
        return TheoryModule(name, tuple(defs), tuple(lemmas), tuple(triggers))

    def _parse_def_params(self) -> tuple[TheoryDeclParam, ...]:
        self.expect("(")
        params: list[TheoryDeclParam] = []
        if not self.at(")"):
            params.extend(self._parse_def_param_group())
            while self.accept(","):
                params.extend(self._parse_def_param_group())
        self.expect(")")
        return tuple(params)

    def _parse_def_param_group(self) -> list[TheoryDeclParam]:
        names = [self.decl_name("parameter name")]
        while self.accept(","):
            names.append(self.decl_name("parameter name"))
        self.expect(":")
        ty = self.parse_bound_type()
        return [TheoryDeclParam(n, ty) for n in names]

    def _parse_def(self, opaque: bool, start: Token) -> TheoryDef:
        name = self.decl_name("function name")
        params = self._parse_def_params()
        self.expect(":")
        result = self.parse_plain_type()
        self.expect("=")
        body = self.parse_expression()
        self.expect(";")
        return TheoryDef(name, params, result, body, opaque,
                         span=self.span_from(start))


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def parse_context(text: str, file: str = "<input>"):
    """Parse and resolve a .ibp context.

    Returns a `VerificationContext` on success, otherwise a non-empty
    list of `Diagnostic`s.
    """
    try:
        ctx = _Parser(text, file).parse_context()
    except ParseError as e:
        return [e.diagnostic]
    diags = _resolve(ctx, file)
    return diags if diags else ctx


def parse_expr(text: str, file: str = "<expr>"):
    """Parse a single expression; returns Expr or a Diagnostic."""
    try:
        p = _Parser(text, file)
        e = p.parse_expression()
        if p.tok.kind != "eof":
            p.fail(f"unexpected input after expression: {p._describe()}")
        return e
    except ParseError as err:
        return err.diagnostic


def parse_theory_module(text: str, file: str = "<theory>"):
    """Parse a .ibt theory; returns TheoryModule or a list of Diagnostics."""
    try:
        return _TheoryParser(text, file).parse_theory()
    except ParseError as e:
        return [e.diagnostic]
