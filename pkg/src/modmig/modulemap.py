"""Modulemap documents: generation from classified headers, rendering, parsing.

Only the subset of the Clang modulemap grammar that the generator emits is
supported::

    module DataFormatsTrackerCommon_xr {
      module "TrackerTopology" {header "DataFormats/TrackerCommon/interface/TrackerTopology.h" export *}
      textual header "DataFormats/TrackerCommon/interface/Assert.h"
    }
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import LayeringViolationError, ModulemapError, ModulemapParseError
from .manifest import LibraryManifest
from .sanitizer import Classification, HeaderRecord

DEFAULT_SUFFIX = "_xr"

_NORMAL = {Classification.STANDALONE, Classification.INCOMPLETE, Classification.CYCLIC}


class EntryKind(str, Enum):
    NORMAL = "normal"
    TEXTUAL = "textual"


@dataclass(frozen=True)
class HeaderEntry:
    submodule_name: str
    header_path: str
    kind: EntryKind = EntryKind.NORMAL
    export_all: bool = True

    @classmethod
    def textual(cls, header_path: str) -> "HeaderEntry":
        return cls(submodule_stem(header_path), header_path, EntryKind.TEXTUAL, False)


@dataclass(frozen=True)
class ModuleDef:
    name: str
    entries: tuple[HeaderEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))


@dataclass(frozen=True)
class ModulemapDocument:
    modules: tuple[ModuleDef, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))
        names = [m.name for m in self.modules]
        if len(names) != len(set(names)):
            raise ModulemapError("module names must be unique within a modulemap")

    def module(self, name: str) -> ModuleDef:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)


@dataclass(frozen=True)
class Omission:
    path: str
    classification: Classification
    reason: str


@dataclass(frozen=True)
class GeneratedModulemap:
    document: ModulemapDocument
    omitted: tuple[Omission, ...] = ()
    # absolute header path -> module name, Normal entries only
    assignment: dict[str, str] = field(default_factory=dict)


def submodule_stem(header_path: str) -> str:
    return posixpath.splitext(posixpath.basename(header_path))[0]


def generate_modulemap(
    manifest: LibraryManifest,
    records: Iterable[HeaderRecord],
    sccs: Iterable[Iterable[str]] = (),
    suffix: str = DEFAULT_SUFFIX,
) -> GeneratedModulemap:
    """One module per library, one entry per surviving interface header.

    Standalone, Incomplete and Cyclic headers become ``export *`` submodules,
    Macro headers become textual headers, Broken and TokenGenerating headers
    are omitted (and reported). Raises :class:`LayeringViolationError` when a
    cycle spans libraries.
    """
    by_path = {r.path: r for r in records}
    owner: dict[str, str] = {}
    for lib in manifest.libraries:
        for path in lib.headers():
            if path in owner:
                raise ModulemapError(
                    f"header {path} is claimed by libraries {owner[path]!r} and {lib.name!r}"
                )
            owner[path] = lib.name

    for scc in sccs:
        libs = {owner[p] for p in scc if p in owner}
        if len(libs) > 1:
            raise LayeringViolationError(scc, libs)

    stems: dict[str, str] = {}
    for lib in manifest.libraries:
        if lib.module_stem in stems:
            raise ModulemapError(
                f"libraries {stems[lib.module_stem]!r} and {lib.name!r} both map to module name "
                f"{lib.module_stem + suffix!r}"
            )
        stems[lib.module_stem] = lib.name

    modules = []
    omitted = []
    assignment = {}
    for lib in manifest.libraries:
        module_name = lib.module_stem + suffix
        entries = []
        seen_names: dict[str, str] = {}
        for path in lib.headers():
            record = by_path.get(path)
            if record is None or record.classification is None:
                raise ModulemapError(f"header {path} has not been classified")
            cls = record.classification
            spelled = manifest.include_spelling(path)
            if cls in _NORMAL:
                entry = HeaderEntry(submodule_stem(spelled), spelled)
                assignment[path] = module_name
            elif cls is Classification.MACRO:
                entry = HeaderEntry.textual(spelled)
            else:
                reason = "; ".join(record.evidence) or cls.value
                omitted.append(Omission(path, cls, reason))
                continue
            if entry.submodule_name in seen_names:
                raise ModulemapError(
                    f"duplicate submodule {entry.submodule_name!r} in {module_name}: "
                    f"{seen_names[entry.submodule_name]} and {path}"
                )
            seen_names[entry.submodule_name] = path
            entries.append(entry)
        entries.sort(key=lambda e: e.header_path)
        modules.append(ModuleDef(module_name, tuple(entries)))
    omitted.sort(key=lambda o: o.path)
    return GeneratedModulemap(ModulemapDocument(tuple(modules)), tuple(omitted), assignment)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_modulemap(doc: ModulemapDocument) -> str:
    lines = []
    for module in doc.modules:
        lines.append(f"module {module.name} {{")
        for e in module.entries:
            if e.kind is EntryKind.TEXTUAL:
                lines.append(f"  textual header {_quote(e.header_path)}")
            else:
                export = " export *" if e.export_all else ""
                lines.append(
                    f"  module {_quote(e.submodule_name)} {{header {_quote(e.header_path)}{export}}}"
                )
        lines.append("}")
    return "".join(line + "\n" for line in lines)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[{}*])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<bad>.)
    """,
    re.X,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line = 1
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind == "string":
            raw = m.group()[1:-1]
            tokens.append(_Token("string", re.sub(r"\\(.)", r"\1", raw), line))
        elif kind == "bad":
            raise ModulemapParseError(f"unexpected character {m.group()!r}", line)
        elif kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), line))
    return tokens


class _Parser:
    def __init__(self, tokens: Sequence[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, value: str | None = None, what: str | None = None) -> _Token:
        tok = self.peek()
        expected = what or (repr(value) if value else kind)
        if tok is None:
            last = self.tokens[-1].line if self.tokens else 1
            raise ModulemapParseError(f"unexpected end of input, expected {expected}", last)
        if tok.kind != kind or (value is not None and tok.value != value):
            raise ModulemapParseError(f"expected {expected}, found {tok.value!r}", tok.line)
        self.pos += 1
        return tok

    def document(self) -> ModulemapDocument:
        modules = []
        while self.peek() is not None:
            modules.append(self.module())
        try:
            return ModulemapDocument(tuple(modules))
        except ModulemapError as exc:
            raise ModulemapParseError(str(exc), self.tokens[-1].line) from None

    def module(self) -> ModuleDef:
        self.take("ident", "module")
        name = self.take("ident", what="module name").value
        opener = self.take("punct", "{")
        entries = []
        while True:
            tok = self.peek()
            if tok is None:
                raise ModulemapParseError(f"unbalanced braces: module {name} is never closed", opener.line)
            if tok.kind == "punct" and tok.value == "}":
                self.pos += 1
                return ModuleDef(name, tuple(entries))
            if tok.kind == "ident" and tok.value == "module":
                entries.append(self.submodule())
            elif tok.kind == "ident" and tok.value == "textual":
                self.pos += 1
                self.take("ident", "header")
                entries.append(HeaderEntry.textual(self.take("string", what="header path").value))
            else:
                raise ModulemapParseError(f"unknown construct {tok.value!r}", tok.line)

    def submodule(self) -> HeaderEntry:
        self.take("ident", "module")
        name = self.take("string", what="quoted submodule name").value
        self.take("punct", "{")
        self.take("ident", "header")
        path = self.take("string", what="header path").value
        export = False
        tok = self.peek()
        if tok is not None and tok.kind == "ident" and tok.value == "export":
            self.pos += 1
            self.take("punct", "*")
            export = True
        self.take("punct", "}", what="'}' closing submodule")
        return HeaderEntry(name, path, EntryKind.NORMAL, export)


def parse_modulemap(text: str) -> ModulemapDocument:
    return _Parser(_tokenize(text)).document()
