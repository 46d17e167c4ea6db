"""Invariant-based programs: parse, analyze, verify, run.

A program is a set of situations (predicates over the state) connected
by transitions; nesting a situation inside another means it inherits the
outer invariant.  This package parses the textual diagram format,
generates the proof obligations that make the diagram a total-correctness
theorem, discharges them through an external SMT solver, and can also
execute the diagram concretely while checking every invariant at runtime.
"""

from .source import Diagnostic, SourceSpan, has_errors
from .model import SemType, VerificationContext
from .parser import ParseError, parse_context, parse_expr, parse_theory_module
from .prelude import TheoryEnv, builtin_theory, load_theory
from .vcgen import VC, generate_all, wp

__all__ = [
    "Diagnostic", "SourceSpan", "has_errors",
    "SemType", "VerificationContext",
    "ParseError", "parse_context", "parse_expr", "parse_theory_module",
    "TheoryEnv", "builtin_theory", "load_theory",
    "VC", "generate_all", "wp",
]

__version__ = "0.1.0"
