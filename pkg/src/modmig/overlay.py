"""Virtual filesystem overlay documents.

An overlay mounts physical files (typically generated modulemaps) at virtual
locations, e.g. ``/usr/include/module.modulemap``, without writing there::

    {
      "version": 0,
      "roots": [
        {
          "name": "/usr/include/",
          "type": "directory",
          "contents": [
            {
              "name": "module.modulemap",
              "type": "file",
              "external-contents": "/builddir/include/libc.modulemap"
            }
          ]
        }
      ]
    }

Documents are usable in memory: :func:`resolve` answers lookups directly and
:func:`relocate` rewrites paths when the build tree moves, so nothing has to
be fixed at configuration time.
"""

from __future__ import annotations

import json
import posixpath
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .errors import OverlayError


@dataclass(frozen=True)
class OverlayEntry:
    name: str
    external_contents: str

    def __post_init__(self):
        if not self.name or "/" in self.name:
            raise OverlayError(f"overlay entry name must be a plain file name, got {self.name!r}")
        if not posixpath.isabs(self.external_contents):
            raise OverlayError(f"external-contents must be absolute, got {self.external_contents!r}")


@dataclass(frozen=True)
class OverlayRoot:
    name: str
    contents: tuple[OverlayEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "contents", tuple(self.contents))
        if not posixpath.isabs(self.name):
            raise OverlayError(f"overlay root must be an absolute directory, got {self.name!r}")
        if not self.contents:
            raise OverlayError(f"overlay root {self.name} has no contents")


@dataclass(frozen=True)
class OverlayDocument:
    roots: tuple[OverlayRoot, ...] = ()
    version: int = 0

    def __post_init__(self):
        object.__setattr__(self, "roots", tuple(self.roots))
        if self.version != 0:
            raise OverlayError(f"unsupported overlay version {self.version}")
        seen = set()
        for root in self.roots:
            key = _dir_key(root.name)
            if key in seen:
                raise OverlayError(f"duplicate overlay root {root.name}")
            seen.add(key)

    @cached_property
    def _index(self) -> dict[str, str]:
        index = {}
        for root in self.roots:
            for entry in root.contents:
                index.setdefault(_join(root.name, entry.name), entry.external_contents)
        return index

    def resolve(self, query_path: str) -> str | None:
        return self._index.get(posixpath.normpath(query_path))


@dataclass(frozen=True)
class MountSpec:
    virtual_dir: str
    virtual_name: str
    physical_path: str

    def __post_init__(self):
        for p in (self.virtual_dir, self.physical_path):
            if not posixpath.isabs(p):
                raise OverlayError(f"mount paths must be absolute, got {p!r}")

    @classmethod
    def parse(cls, spec: str) -> "MountSpec":
        """``/usr/include/c++/module.modulemap=/builddir/include/stl.modulemap``.

        The virtual directory keeps a trailing ``/``.
        """
        virtual, sep, physical = spec.partition("=")
        if not sep or not virtual or not physical:
            raise OverlayError(f"mount must look like VIRTUAL_FILE=PHYSICAL_FILE, got {spec!r}")
        vdir, vname = posixpath.split(virtual)
        if not vname:
            raise OverlayError(f"mount target {virtual!r} names a directory, not a file")
        return cls(vdir.rstrip("/") + "/", vname, physical)


def _dir_key(name: str) -> str:
    return posixpath.normpath(name)


def _join(directory: str, name: str) -> str:
    return posixpath.normpath(posixpath.join(directory, name))


def build_overlay(mounts: Iterable[MountSpec]) -> OverlayDocument:
    """Group mounts into one root per virtual directory, in first-appearance order."""
    mounts = list(mounts)
    if not mounts:
        raise OverlayError("an overlay needs at least one mount")
    roots: dict[str, tuple[str, list[OverlayEntry]]] = {}
    targets: dict[str, str] = {}
    for m in mounts:
        if "/" in m.virtual_name:
            raise OverlayError(
                f"nested virtual paths are unsupported: {m.virtual_name!r} under {m.virtual_dir}"
            )
        target = _join(m.virtual_dir, m.virtual_name)
        if target in targets:
            raise OverlayError(
                f"virtual file {target} is mounted twice: from {targets[target]} and {m.physical_path}"
            )
        targets[target] = m.physical_path
        key = _dir_key(m.virtual_dir)
        roots.setdefault(key, (m.virtual_dir, []))[1].append(OverlayEntry(m.virtual_name, m.physical_path))
    return OverlayDocument(tuple(OverlayRoot(name, tuple(entries)) for name, entries in roots.values()))


def overlay_to_dict(doc: OverlayDocument) -> dict:
    return {
        "version": doc.version,
        "roots": [
            {
                "name": root.name,
                "type": "directory",
                "contents": [
                    {"name": e.name, "type": "file", "external-contents": e.external_contents}
                    for e in root.contents
                ],
            }
            for root in doc.roots
        ],
    }


def render_overlay(doc: OverlayDocument) -> str:
    return json.dumps(overlay_to_dict(doc), indent=2) + "\n"


def _single_to_double_quotes(text: str) -> str:
    """Rewrite single-quoted string literals as JSON double-quoted ones."""
    out = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            out.append(text[i : j + 1])
            i = j + 1
        elif c == "'":
            j = i + 1
            buf = []
            while j < n and text[j] != "'":
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1] if text[j + 1] == "'" else text[j : j + 2])
                    j += 2
                    continue
                buf.append('\\"' if text[j] == '"' else text[j])
                j += 1
            out.append('"' + "".join(buf) + '"')
            i = j + 1
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _expect_keys(obj, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise OverlayError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise OverlayError(f"{where}: unsupported keys {', '.join(sorted(unknown))}")
    return obj


def _expect_str(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise OverlayError(f"{where}: {key!r} must be a string")
    return value


def parse_overlay(text: str) -> OverlayDocument:
    """Parse strict JSON or the single-quoted variant."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = json.loads(_single_to_double_quotes(text))
        except json.JSONDecodeError as exc:
            raise OverlayError(
                f"malformed overlay JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from None
    top = _expect_keys(data, {"version", "roots"}, "overlay")
    version = top.get("version")
    if isinstance(version, bool) or version != 0:
        raise OverlayError(f"unsupported overlay version {version!r}; only 0 is supported")
    raw_roots = top.get("roots", [])
    if not isinstance(raw_roots, list):
        raise OverlayError("overlay: 'roots' must be a list")
    roots = []
    for i, raw in enumerate(raw_roots):
        where = f"roots[{i}]"
        _expect_keys(raw, {"name", "type", "contents"}, where)
        if raw.get("type") != "directory":
            raise OverlayError(f"{where}: unknown type {raw.get('type')!r}, expected 'directory'")
        contents = raw.get("contents")
        if not isinstance(contents, list):
            raise OverlayError(f"{where}: 'contents' must be a list")
        entries = []
        for j, item in enumerate(contents):
            w = f"{where}.contents[{j}]"
            _expect_keys(item, {"name", "type", "external-contents"}, w)
            if item.get("type") != "file":
                raise OverlayError(f"{w}: unknown type {item.get('type')!r}, expected 'file'")
            entries.append(OverlayEntry(_expect_str(item, "name", w), _expect_str(item, "external-contents", w)))
        roots.append(OverlayRoot(_expect_str(raw, "name", where), tuple(entries)))
    return OverlayDocument(tuple(roots))


def _replace_prefix(path: str, old: str, new: str) -> str | None:
    old = old.rstrip("/")
    new = new.rstrip("/")
    if path == old or path.startswith(old + "/"):
        return (new + path[len(old):]) or "/"
    return None


def relocate(doc: OverlayDocument, old_prefix: str, new_prefix: str) -> tuple[OverlayDocument, int]:
    """Move every root name and external path under ``old_prefix`` to ``new_prefix``.

    Matching is by whole path segments: ``/build`` does not match
    ``/builddir``. Returns the new document and the number of paths changed.
    """
    if not posixpath.isabs(old_prefix) or not posixpath.isabs(new_prefix):
        raise OverlayError("relocation prefixes must be absolute")
    changes = 0

    def move(path: str) -> str:
        nonlocal changes
        moved = _replace_prefix(path, old_prefix, new_prefix)
        if moved is None:
            return path
        changes += 1
        return moved

    roots = tuple(
        OverlayRoot(move(root.name), tuple(OverlayEntry(e.name, move(e.external_contents)) for e in root.contents))
        for root in doc.roots
    )
    return OverlayDocument(roots, doc.version), changes


def resolve(doc: OverlayDocument, query_path: str) -> str | None:
    """Physical file backing ``query_path``, or ``None`` to fall through to the real filesystem."""
    return doc.resolve(query_path)
