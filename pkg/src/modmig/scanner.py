"""Directive-level scanner for C/C++ source text.

This is not a preprocessor. It splices continuation lines, blanks out
comments, and walks ``#`` directives to find includes, track conditional
nesting, recognize include guards, and count macro definitions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_DIRECTIVE_RE = re.compile(r"#\s*([A-Za-z_]\w*)?(.*)\Z", re.S)
_IDENT_RE = re.compile(r"[A-Za-z_]\w*")
_IFNDEF_DEFINED_RE = re.compile(r"!\s*defined\s*(?:\(\s*([A-Za-z_]\w*)\s*\)|([A-Za-z_]\w*))\s*\Z")

_OPENERS = frozenset({"if", "ifdef", "ifndef"})
_BRANCHES = frozenset({"elif", "else", "elifdef", "elifndef"})
_INCLUDES = frozenset({"include", "include_next"})


@dataclass(frozen=True)
class IncludeDirective:
    spelled_path: str
    angle_form: bool
    line: int
    conditional: bool = False

    def __post_init__(self):
        if not self.spelled_path or "\n" in self.spelled_path:
            raise ValueError(f"invalid spelled include path {self.spelled_path!r}")

    def spelling(self) -> str:
        return f"<{self.spelled_path}>" if self.angle_form else f'"{self.spelled_path}"'


@dataclass(frozen=True)
class MacroStats:
    macro_defs: int = 0
    decl_lines: int = 0
    conditional_defs: int = 0

    @property
    def macro_ratio(self) -> float:
        return self.macro_defs / max(1, self.macro_defs + self.decl_lines)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}: {self.message}"


@dataclass(frozen=True)
class SourceScan:
    includes: tuple[IncludeDirective, ...]
    diagnostics: tuple[Diagnostic, ...]
    macro_stats: MacroStats
    has_guard: bool
    line_count: int


@dataclass(frozen=True)
class _Logical:
    line: int
    text: str  # comments removed, continuations spliced, stripped


@dataclass(frozen=True)
class _Directive:
    index: int  # position in the logical line list
    line: int
    name: str
    rest: str


def _splice(physical: list[str]) -> list[tuple[int, str]]:
    out = []
    buf: list[str] = []
    start = 0
    for lineno, text in enumerate(physical, 1):
        if not buf:
            start = lineno
        if text.endswith("\\"):
            buf.append(text[:-1])
            continue
        buf.append(text)
        out.append((start, "".join(buf)))
        buf = []
    if buf:
        out.append((start, "".join(buf)))
    return out


def _strip_comments(lines: list[tuple[int, str]]) -> list[_Logical]:
    out = []
    in_block = False
    for lineno, text in lines:
        chars = []
        i, n = 0, len(text)
        quote = None
        while i < n:
            c = text[i]
            if in_block:
                if text.startswith("*/", i):
                    in_block = False
                    chars.append(" ")
                    i += 2
                else:
                    i += 1
                continue
            if quote:
                chars.append(c)
                if c == "\\" and i + 1 < n:
                    chars.append(text[i + 1])
                    i += 2
                    continue
                if c == quote:
                    quote = None
                i += 1
                continue
            if text.startswith("/*", i):
                in_block = True
                i += 2
                continue
            if text.startswith("//", i):
                break
            if c in "\"'":
                quote = c
            chars.append(c)
            i += 1
        out.append(_Logical(lineno, "".join(chars).strip()))
    return out


def _directives(logical: list[_Logical]) -> list[_Directive]:
    found = []
    for index, ll in enumerate(logical):
        if not ll.text.startswith("#"):
            continue
        m = _DIRECTIVE_RE.match(ll.text)
        name = m.group(1) or ""
        found.append(_Directive(index, ll.line, name, m.group(2).strip()))
    return found


def _guarded_macro(d: _Directive) -> str | None:
    if d.name == "ifndef":
        m = _IDENT_RE.match(d.rest)
        return m.group(0) if m else None
    if d.name == "if":
        m = _IFNDEF_DEFINED_RE.match(d.rest)
        if m:
            return m.group(1) or m.group(2)
    return None


def _find_guard(logical: list[_Logical], directives: list[_Directive]) -> tuple[int, int] | None:
    """Indices (into ``directives``) of the guard's ``#ifndef`` and ``#define``, if any."""
    if len(directives) < 3:
        return None
    opener, definer = directives[0], directives[1]
    macro = _guarded_macro(opener)
    if macro is None or definer.name != "define":
        return None
    m = _IDENT_RE.match(definer.rest)
    if not m or m.group(0) != macro:
        return None
    # No code may precede the guard or follow its #endif.
    if any(ll.text for ll in logical[: opener.index]):
        return None
    depth = 0
    close = None
    for k, d in enumerate(directives):
        if d.name in _OPENERS:
            depth += 1
        elif d.name in _BRANCHES and depth == 1:
            return None
        elif d.name == "endif":
            depth -= 1
            if depth == 0:
                close = k
                break
    if close is None or close != len(directives) - 1:
        return None
    if any(ll.text for ll in logical[directives[close].index + 1:]):
        return None
    return 0, 1


def _parse_include(d: _Directive) -> tuple[str, bool] | str:
    """``(spelled_path, angle_form)`` or a diagnostic message."""
    rest = d.rest
    if not rest:
        return "#include without a file name"
    if rest[0] in "<\"":
        close = ">" if rest[0] == "<" else '"'
        end = rest.find(close, 1)
        if end < 0:
            return f"malformed #{d.name}: missing closing {close}"
        spelled = rest[1:end]
        if not spelled:
            return f"malformed #{d.name}: empty file name"
        return spelled, rest[0] == "<"
    return f"computed #{d.name} {rest} is not resolved (macro expansion unsupported)"


def scan_source(text: str) -> SourceScan:
    physical = text.splitlines()
    logical = _strip_comments(_splice(physical))
    directives = _directives(logical)
    guard = _find_guard(logical, directives)
    has_guard = guard is not None

    includes = []
    diagnostics = []
    stack: list[bool] = []  # True for the include guard's own region
    macro_defs = conditional_defs = 0
    for k, d in enumerate(directives):
        conditional = any(not is_guard for is_guard in stack)
        if d.name in _OPENERS:
            stack.append(guard is not None and k == guard[0])
        elif d.name == "endif":
            if stack:
                stack.pop()
            else:
                diagnostics.append(Diagnostic(d.line, "#endif without matching #if"))
        elif d.name == "define":
            if guard is not None and k == guard[1]:
                continue
            macro_defs += 1
            if conditional:
                conditional_defs += 1
        elif d.name == "pragma" and d.rest.split() == ["once"]:
            has_guard = True
        elif d.name in _INCLUDES:
            parsed = _parse_include(d)
            if isinstance(parsed, str):
                diagnostics.append(Diagnostic(d.line, parsed))
            else:
                includes.append(IncludeDirective(parsed[0], parsed[1], d.line, conditional))
    if stack:
        diagnostics.append(Diagnostic(directives[-1].line, "unterminated conditional block"))

    decl_lines = sum(1 for ll in logical if ll.text and not ll.text.startswith("#"))
    return SourceScan(
        includes=tuple(includes),
        diagnostics=tuple(diagnostics),
        macro_stats=MacroStats(macro_defs, decl_lines, conditional_defs),
        has_guard=has_guard,
        line_count=len(physical),
    )


def scan_includes(source_text: str) -> list[IncludeDirective]:
    """Every ``#include`` in lexical order; see :func:`scan_source` for diagnostics."""
    return list(scan_source(source_text).includes)
