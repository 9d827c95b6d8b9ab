"""Codebase manifest: libraries, include search paths and translation units.

The manifest is a JSON object::

    {
      "libraries": [{"name": "DataFormats/TrackerCommon",
                     "interface_dir": "src/DataFormats/TrackerCommon/interface",
                     "extra_headers": []}],
      "search_paths": ["src", "/usr/include"],
      "tu_roots": ["src/main.cc"],
      "overrides": {"force_textual": [], "force_exclude": [],
                    "macro_ratio_threshold": 0.5}
    }

Relative paths are resolved against the directory holding the manifest file.
"""

from __future__ import annotations

import json
import os
import posixpath
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import ManifestError

HEADER_SUFFIXES = (".h", ".hh", ".hpp", ".hxx", ".h++", ".inl", ".icc", ".tcc", ".inc", ".def")

IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NAME_STRIP_RE = re.compile(r"[/\\.\-]")


def canonical_path(path: str, base: str | None = None) -> str:
    """Absolute, lexically normalized path with ``/`` separators.

    Symlinks are not resolved and case is preserved.
    """
    path = str(path).replace(os.sep, "/")
    if not posixpath.isabs(path):
        root = (base or os.getcwd()).replace(os.sep, "/")
        path = posixpath.join(root, path)
    path = posixpath.normpath(path)
    # normpath keeps a leading "//" (POSIX allows it to be special); we don't.
    if path.startswith("//"):
        path = "/" + path.lstrip("/")
    return path


def is_under(path: str, directory: str) -> bool:
    directory = directory.rstrip("/")
    return path == directory or path.startswith(directory + "/")


def relative_to(path: str, base: str) -> str:
    """``path`` relative to ``base`` when it lies below it, else unchanged."""
    base = base.rstrip("/")
    if base and path.startswith(base + "/"):
        return path[len(base) + 1:]
    return path


def sanitize_module_name(name: str) -> str:
    """Drop path separators, dashes and dots: ``DataFormats/TrackerCommon`` -> ``DataFormatsTrackerCommon``."""
    return _NAME_STRIP_RE.sub("", name)


@dataclass(frozen=True)
class ClassificationOverrides:
    force_textual: frozenset[str] = frozenset()
    force_exclude: frozenset[str] = frozenset()
    macro_ratio_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "force_textual", frozenset(self.force_textual))
        object.__setattr__(self, "force_exclude", frozenset(self.force_exclude))
        if not 0.0 < self.macro_ratio_threshold <= 1.0:
            raise ManifestError(
                f"macro_ratio_threshold must lie in (0, 1], got {self.macro_ratio_threshold}"
            )
        both = self.force_textual & self.force_exclude
        if both:
            raise ManifestError(
                "headers listed in both force_textual and force_exclude: " + ", ".join(sorted(both))
            )


@dataclass(frozen=True)
class LibrarySpec:
    name: str
    interface_dir: str
    extra_headers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "extra_headers", tuple(self.extra_headers))
        if not self.name:
            raise ManifestError("library name must be non-empty")
        if not IDENTIFIER_RE.match(sanitize_module_name(self.name)):
            raise ManifestError(
                f"library name {self.name!r} is not an identifier after sanitization"
            )

    @property
    def module_stem(self) -> str:
        return sanitize_module_name(self.name)

    def headers(self) -> list[str]:
        """Interface headers (recursively under ``interface_dir``) plus extra headers, sorted."""
        found = set(self.extra_headers)
        for dirpath, dirnames, filenames in os.walk(self.interface_dir):
            dirnames.sort()
            for filename in filenames:
                if filename.endswith(HEADER_SUFFIXES):
                    found.add(canonical_path(os.path.join(dirpath, filename)))
        return sorted(found)


@dataclass(frozen=True)
class LibraryManifest:
    libraries: tuple[LibrarySpec, ...] = ()
    search_paths: tuple[str, ...] = ()
    tu_roots: tuple[str, ...] = ()
    overrides: ClassificationOverrides = field(default_factory=ClassificationOverrides)
    base_dir: str = "/"

    def __post_init__(self):
        object.__setattr__(self, "libraries", tuple(self.libraries))
        object.__setattr__(self, "search_paths", tuple(self.search_paths))
        object.__setattr__(self, "tu_roots", tuple(self.tu_roots))
        seen: set[str] = set()
        for lib in self.libraries:
            if lib.name in seen:
                raise ManifestError(f"duplicate library name {lib.name!r}")
            seen.add(lib.name)

    def check_paths(self) -> None:
        for lib in self.libraries:
            if not os.path.isdir(lib.interface_dir):
                raise ManifestError(
                    f"interface_dir of library {lib.name!r} does not exist: {lib.interface_dir}"
                )

    def library(self, name: str) -> LibrarySpec:
        for lib in self.libraries:
            if lib.name == name:
                return lib
        raise ManifestError(f"unknown library {name!r}")

    def library_headers(self) -> dict[str, list[str]]:
        return {lib.name: lib.headers() for lib in self.libraries}

    def interface_headers(self) -> list[str]:
        headers: set[str] = set()
        for lib in self.libraries:
            headers.update(lib.headers())
        return sorted(headers)

    def owning_libraries(self, path: str) -> list[str]:
        return [
            lib.name
            for lib in self.libraries
            if is_under(path, lib.interface_dir) or path in lib.extra_headers
        ]

    def include_spelling(self, path: str) -> str:
        """How ``path`` is spelled relative to the include path it lives under.

        The first search path containing the header wins; headers outside every
        search path are given relative to the manifest directory.
        """
        for sp in self.search_paths:
            if is_under(path, sp) and path != sp:
                return relative_to(path, sp)
        return relative_to(path, self.base_dir)

    def only(self, names: Iterable[str]) -> "LibraryManifest":
        wanted = list(names)
        missing = [n for n in wanted if n not in {lib.name for lib in self.libraries}]
        if missing:
            raise ManifestError("unknown libraries in filter: " + ", ".join(missing))
        return replace(self, libraries=tuple(lib for lib in self.libraries if lib.name in wanted))


def _str_list(data: dict, key: str, where: str) -> list[str]:
    value = data.get(key, [])
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ManifestError(f"{where}: {key!r} must be a list of strings")
    return value


def manifest_from_dict(data: dict, base_dir: str, check: bool = True) -> LibraryManifest:
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    base_dir = canonical_path(base_dir)

    def canon(p: str) -> str:
        return canonical_path(p, base_dir)

    libraries = []
    raw_libs = data.get("libraries", [])
    if not isinstance(raw_libs, list):
        raise ManifestError("'libraries' must be a list")
    for i, raw in enumerate(raw_libs):
        where = f"libraries[{i}]"
        if not isinstance(raw, dict) or not isinstance(raw.get("name"), str):
            raise ManifestError(f"{where}: expected an object with a string 'name'")
        if not isinstance(raw.get("interface_dir"), str):
            raise ManifestError(f"{where}: 'interface_dir' must be a string")
        libraries.append(
            LibrarySpec(
                name=raw["name"],
                interface_dir=canon(raw["interface_dir"]),
                extra_headers=tuple(canon(p) for p in _str_list(raw, "extra_headers", where)),
            )
        )

    raw_over = data.get("overrides", {}) or {}
    if not isinstance(raw_over, dict):
        raise ManifestError("'overrides' must be an object")
    threshold = raw_over.get("macro_ratio_threshold", 0.5)
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
        raise ManifestError("'macro_ratio_threshold' must be a number")
    overrides = ClassificationOverrides(
        force_textual=frozenset(canon(p) for p in _str_list(raw_over, "force_textual", "overrides")),
        force_exclude=frozenset(canon(p) for p in _str_list(raw_over, "force_exclude", "overrides")),
        macro_ratio_threshold=float(threshold),
    )

    manifest = LibraryManifest(
        libraries=tuple(libraries),
        search_paths=tuple(canon(p) for p in _str_list(data, "search_paths", "manifest")),
        tu_roots=tuple(canon(p) for p in _str_list(data, "tu_roots", "manifest")),
        overrides=overrides,
        base_dir=base_dir,
    )
    if check:
        manifest.check_paths()
    return manifest


def load_manifest(path: str) -> LibraryManifest:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    return manifest_from_dict(data, os.path.dirname(os.path.abspath(path)))
