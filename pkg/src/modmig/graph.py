"""Include graph construction and analysis."""

from __future__ import annotations

import json
import os
import posixpath
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from . import digraph
from .errors import ScanError, UnknownNodeError
from .manifest import LibraryManifest, canonical_path, relative_to
from .scanner import IncludeDirective, MacroStats, SourceScan, scan_source


class NodeKind(str, Enum):
    HEADER = "header"
    TRANSLATION_UNIT = "tu"


@dataclass(frozen=True)
class IncludeEdge:
    source: str
    target: str
    directive: IncludeDirective


@dataclass(frozen=True)
class UnresolvedInclude:
    source: str
    directive: IncludeDirective


@dataclass(frozen=True)
class FileFacts:
    line_count: int = 0
    has_guard: bool = False
    macro_stats: MacroStats = field(default_factory=MacroStats)


@dataclass(frozen=True)
class IncludeGraph:
    nodes: Mapping[str, NodeKind]
    edges: tuple[IncludeEdge, ...] = ()
    unresolved: tuple[UnresolvedInclude, ...] = ()
    facts: Mapping[str, FileFacts] = field(default_factory=dict)
    diagnostics: tuple[str, ...] = ()

    def __post_init__(self):
        for e in self.edges:
            if e.source not in self.nodes or e.target not in self.nodes:
                raise ValueError(f"edge {e.source} -> {e.target} has an endpoint outside the graph")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[str, str]],
        nodes: Iterable[str] = (),
        tus: Iterable[str] = (),
    ) -> "IncludeGraph":
        """Build a graph from bare ``(from, to)`` pairs; handy for synthetic inputs."""
        pairs = list(edges)
        tus = set(tus)
        names = set(nodes) | tus | {a for a, _ in pairs} | {b for _, b in pairs}
        kinds = {
            n: NodeKind.TRANSLATION_UNIT if n in tus else NodeKind.HEADER for n in sorted(names)
        }
        incl = tuple(
            IncludeEdge(a, b, IncludeDirective(posixpath.basename(b) or b, False, i + 1))
            for i, (a, b) in enumerate(pairs)
        )
        return cls(kinds, incl)

    @cached_property
    def successors(self) -> dict[str, tuple[str, ...]]:
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges:
            succ[e.source].add(e.target)
        return {n: tuple(sorted(s)) for n, s in succ.items()}

    @cached_property
    def predecessors(self) -> dict[str, tuple[str, ...]]:
        pred: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges:
            pred[e.target].add(e.source)
        return {n: tuple(sorted(s)) for n, s in pred.items()}

    @property
    def translation_units(self) -> list[str]:
        return sorted(n for n, k in self.nodes.items() if k is NodeKind.TRANSLATION_UNIT)

    @property
    def headers(self) -> list[str]:
        return sorted(n for n, k in self.nodes.items() if k is NodeKind.HEADER)

    def line_counts(self) -> dict[str, int]:
        return {n: self.facts[n].line_count if n in self.facts else 0 for n in self.nodes}

    def without_conditional(self) -> "IncludeGraph":
        return replace(
            self,
            edges=tuple(e for e in self.edges if not e.directive.conditional),
            unresolved=tuple(u for u in self.unresolved if not u.directive.conditional),
        )


def resolve_include(
    from_path: str, directive: IncludeDirective, manifest: LibraryManifest | Sequence[str]
) -> str | None:
    """Canonical path of the included file, or ``None`` when nothing matches.

    Quote includes look next to the including file first; both forms then
    try the search paths in order. First hit wins.
    """
    search_paths = manifest.search_paths if isinstance(manifest, LibraryManifest) else manifest
    candidates = []
    if not directive.angle_form:
        candidates.append(posixpath.dirname(from_path))
    candidates.extend(search_paths)
    for directory in candidates:
        candidate = canonical_path(posixpath.join(directory, directive.spelled_path))
        if os.path.isfile(candidate):
            return candidate
    return None


def _read_and_scan(path: str) -> SourceScan:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise ScanError(f"cannot read {path}: {exc.strerror}") from exc
    return scan_source(data.decode("utf-8", errors="replace"))


def build_graph(
    manifest: LibraryManifest, jobs: int = 1, ignore_conditional: bool = False
) -> IncludeGraph:
    """Scan every TU root and interface header and follow resolved includes.

    Files are scanned level by level, ``jobs`` at a time; results are merged
    in sorted path order so the graph does not depend on scheduling.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    manifest.check_paths()
    tus = set(manifest.tu_roots)
    for tu in sorted(tus):
        if not os.path.isfile(tu):
            raise ScanError(f"translation unit not found: {tu}")
    seeds = tus | set(manifest.interface_headers())

    facts: dict[str, FileFacts] = {}
    edges: list[IncludeEdge] = []
    unresolved: list[UnresolvedInclude] = []
    diagnostics: list[str] = []

    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        frontier = sorted(seeds)
        while frontier:
            scans = list(pool.map(_read_and_scan, frontier) if pool else map(_read_and_scan, frontier))
            discovered: set[str] = set()
            for path, scan in zip(frontier, scans):
                facts[path] = FileFacts(scan.line_count, scan.has_guard, scan.macro_stats)
                diagnostics.extend(f"{path}:{d}" for d in scan.diagnostics)
                for directive in scan.includes:
                    if ignore_conditional and directive.conditional:
                        continue
                    target = resolve_include(path, directive, manifest)
                    if target is None:
                        unresolved.append(UnresolvedInclude(path, directive))
                        continue
                    edges.append(IncludeEdge(path, target, directive))
                    if target not in facts:
                        discovered.add(target)
            frontier = sorted(discovered - facts.keys())
    finally:
        if pool:
            pool.shutdown()

    nodes = {
        p: NodeKind.TRANSLATION_UNIT if p in tus else NodeKind.HEADER for p in sorted(facts)
    }
    edges.sort(key=lambda e: (e.source, e.directive.line, e.target))
    unresolved.sort(key=lambda u: (u.source, u.directive.line))
    return IncludeGraph(
        nodes=nodes,
        edges=tuple(edges),
        unresolved=tuple(unresolved),
        facts=facts,
        diagnostics=tuple(sorted(diagnostics)),
    )


def transitive_includes(graph: IncludeGraph, start: str) -> set[str]:
    if start not in graph.nodes:
        raise UnknownNodeError(start)
    reached = digraph.strictly_reachable(graph.successors, start)
    reached.discard(start)
    return reached


def find_cycles(graph: IncludeGraph) -> list[frozenset[str]]:
    """Include cycles: SCCs with at least two members, plus self-including files."""
    succ = graph.successors
    cycles = []
    for comp in digraph.strongly_connected_components(sorted(graph.nodes), succ.__getitem__):
        if len(comp) > 1 or comp[0] in succ[comp[0]]:
            cycles.append(frozenset(comp))
    cycles.sort(key=min)
    return cycles


def _directive_json(d: IncludeDirective) -> dict:
    return {
        "spelled": d.spelled_path,
        "angle": d.angle_form,
        "line": d.line,
        "conditional": d.conditional,
    }


def graph_to_dict(graph: IncludeGraph, root: str | None = None) -> dict:
    """JSON-ready form with sorted arrays; paths below ``root`` are made relative."""

    def rel(p: str) -> str:
        return relative_to(p, root) if root else p

    return {
        "nodes": [
            {
                "path": rel(p),
                "kind": graph.nodes[p].value,
                "lines": graph.facts[p].line_count if p in graph.facts else 0,
            }
            for p in sorted(graph.nodes, key=rel)
        ],
        "edges": sorted(
            ({"from": rel(e.source), "to": rel(e.target), **_directive_json(e.directive)} for e in graph.edges),
            key=lambda d: (d["from"], d["line"], d["to"]),
        ),
        "unresolved": sorted(
            ({"from": rel(u.source), **_directive_json(u.directive)} for u in graph.unresolved),
            key=lambda d: (d["from"], d["line"]),
        ),
        "diagnostics": sorted(
            (relative_to(d, root) if root else d) for d in graph.diagnostics
        ),
    }


def graph_to_json(graph: IncludeGraph, root: str | None = None) -> str:
    return json.dumps(graph_to_dict(graph, root), indent=2) + "\n"
