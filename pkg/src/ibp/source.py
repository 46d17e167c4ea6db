"""Source positions and diagnostics shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self):
        assert (self.start_line, self.start_col) <= (self.end_line, self.end_col)

    def merge(self, other: "SourceSpan") -> "SourceSpan":
        lo = min((self.start_line, self.start_col), (other.start_line, other.start_col))
        hi = max((self.end_line, self.end_col), (other.end_line, other.end_col))
        return SourceSpan(self.file, lo[0], lo[1], hi[0], hi[1])

    def __str__(self):
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str      # stable, e.g. PARSE001, LIVE002
    message: str
    span: SourceSpan | None = field(default=None, compare=False)

    def __str__(self):
        where = str(self.span) if self.span else "<input>"
        return f"{where}: {self.severity}[{self.code}]: {self.message}"


def has_errors(diagnostics) -> bool:
    return any(d.severity == "error" for d in diagnostics)
