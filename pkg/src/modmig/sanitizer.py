"""Header hygiene: classify headers, run standalone compile checks, break cycles."""

from __future__ import annotations

import itertools
import os
import re
import shlex
import subprocess
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from . import digraph
from .errors import SanitizerError
from .graph import IncludeGraph
from .manifest import ClassificationOverrides, LibraryManifest
from .scanner import MacroStats


class Classification(str, Enum):
    STANDALONE = "Standalone"
    INCOMPLETE = "Incomplete"
    BROKEN = "Broken"
    CYCLIC = "Cyclic"
    MACRO = "Macro"
    TOKEN_GENERATING = "TokenGenerating"


# Categories that fail a CI gate. TokenGenerating is an explicit user annotation.
FINDINGS = frozenset({Classification.CYCLIC, Classification.BROKEN, Classification.INCOMPLETE})

FORWARD_DECLARATION = "replace include with forward declaration"

# clang: fatal error: 'X.h' file not found
# gcc:   fatal error: X.h: No such file or directory
# iwyu:  #include "X.h"  // for Foo   (in the "should add these lines" block)
DEFAULT_MISSING_INCLUDE_PATTERN = (
    r"""['"]([^'"]+)['"] file not found"""
    r"""|error: ([^\s:]+): No such file or directory"""
    r"""|^\s*#include\s*[<"]([^>"]+)[>"]"""
)


@dataclass(frozen=True)
class HeaderRecord:
    path: str
    has_guard: bool
    macro_stats: MacroStats
    classification: Classification | None = None
    evidence: tuple[str, ...] = ()
    missing_includes: tuple[str, ...] = ()
    unchecked: bool = False
    warnings: tuple[str, ...] = ()

    def to_dict(self, rel: Callable[[str], str] = str) -> dict:
        return {
            "path": rel(self.path),
            "classification": self.classification.value if self.classification else None,
            "has_guard": self.has_guard,
            "macro_stats": {
                "macro_defs": self.macro_stats.macro_defs,
                "decl_lines": self.macro_stats.decl_lines,
                "conditional_defs": self.macro_stats.conditional_defs,
            },
            "evidence": list(self.evidence),
            "missing_includes": list(self.missing_includes),
            "unchecked": self.unchecked,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict, unrel: Callable[[str], str] = str) -> "HeaderRecord":
        stats = data["macro_stats"]
        return cls(
            path=unrel(data["path"]),
            has_guard=data["has_guard"],
            macro_stats=MacroStats(stats["macro_defs"], stats["decl_lines"], stats["conditional_defs"]),
            classification=Classification(data["classification"]) if data["classification"] else None,
            evidence=tuple(data["evidence"]),
            missing_includes=tuple(data["missing_includes"]),
            unchecked=data["unchecked"],
            warnings=tuple(data["warnings"]),
        )


@dataclass(frozen=True)
class CompileCheckResult:
    header: str
    succeeded: bool
    missing_includes: tuple[str, ...] = ()
    raw_diagnostics: str = ""
    spawn_failed: bool = False

    def __post_init__(self):
        if self.succeeded and self.missing_includes:
            raise ValueError("a successful check cannot report missing includes")


@dataclass(frozen=True)
class CheckCommand:
    header: str
    command: str


@dataclass(frozen=True)
class CycleBreak:
    source: str
    target: str
    rationale: str = FORWARD_DECLARATION

    @property
    def edge(self) -> tuple[str, str]:
        return self.source, self.target


def header_records(graph: IncludeGraph, manifest: LibraryManifest) -> list[HeaderRecord]:
    """Unclassified records for every interface header, with facts taken from the scan."""
    records = []
    for path in manifest.interface_headers():
        facts = graph.facts.get(path)
        if facts is None:
            records.append(HeaderRecord(path, False, MacroStats()))
        else:
            records.append(HeaderRecord(path, facts.has_guard, facts.macro_stats))
    return records


def _unreachable(graph: IncludeGraph, paths: Iterable[str]) -> set[str]:
    tus = graph.translation_units
    seen = digraph.reachable(graph.successors, tus)
    return {p for p in paths if p not in seen}


def detect_broken(graph: IncludeGraph, manifest: LibraryManifest) -> set[str]:
    """Interface headers that no translation unit ever (transitively) includes."""
    return _unreachable(graph, manifest.interface_headers()) - set(manifest.tu_roots)


def detect_macro_headers(
    records: Iterable[HeaderRecord], overrides: ClassificationOverrides
) -> set[str]:
    return {
        r.path
        for r in records
        if r.path in overrides.force_textual
        or r.macro_stats.macro_ratio >= overrides.macro_ratio_threshold
    }


def token_generating_warnings(graph: IncludeGraph, records: Iterable[HeaderRecord]) -> dict[str, str]:
    """Heuristic hints for headers that look like X-macro style token generators.

    A header is flagged when it lacks an include guard, defines macros, and
    some file includes it more than once. Detection is never automatic: such
    headers still need a ``force_exclude`` annotation.
    """
    repeats = Counter((e.source, e.target) for e in graph.edges)
    multi = {}
    for (src, dst), n in sorted(repeats.items()):
        if n > 1:
            multi.setdefault(dst, (src, n))
    hints = {}
    for r in records:
        if r.has_guard or r.macro_stats.macro_defs == 0 or r.path not in multi:
            continue
        src, n = multi[r.path]
        hints[r.path] = (
            f"possible token-generating header: unguarded, defines macros, "
            f"included {n} times by {src}; consider force_exclude"
        )
    return hints


def classify_headers(
    graph: IncludeGraph,
    records: Sequence[HeaderRecord],
    sccs: Iterable[Iterable[str]],
    compile_results: Mapping[str, CompileCheckResult] | Iterable[CompileCheckResult] | None,
    overrides: ClassificationOverrides,
) -> list[HeaderRecord]:
    """Give every record exactly one classification.

    Precedence: force_exclude, force_textual, cycle membership, unreachable,
    macro ratio, failed compile check, else Standalone. ``compile_results``
    of ``None`` means checks were not run at all; a mapping that lacks a
    header marks that header ``unchecked``.
    """
    if compile_results is not None and not isinstance(compile_results, Mapping):
        compile_results = {r.header: r for r in compile_results}
    cycle_of: dict[str, frozenset[str]] = {}
    for scc in sccs:
        members = frozenset(scc)
        for m in members:
            cycle_of[m] = members
    broken = _unreachable(graph, (r.path for r in records))
    hints = token_generating_warnings(graph, records)
    threshold = overrides.macro_ratio_threshold

    out = []
    for r in records:
        warnings = (hints[r.path],) if r.path in hints else ()
        missing: tuple[str, ...] = ()
        unchecked = False
        stats = r.macro_stats
        if r.path in overrides.force_exclude:
            cls, evidence = Classification.TOKEN_GENERATING, ["listed in force_exclude"]
        elif r.path in overrides.force_textual:
            cls, evidence = Classification.MACRO, ["listed in force_textual"]
        elif r.path in cycle_of:
            others = sorted(cycle_of[r.path] - {r.path})
            if others:
                evidence = ["in include cycle with " + ", ".join(others)]
            else:
                evidence = ["includes itself"]
            cls = Classification.CYCLIC
        elif r.path in broken:
            cls, evidence = Classification.BROKEN, ["not reachable from any translation unit"]
        elif stats.macro_ratio >= threshold:
            cls = Classification.MACRO
            evidence = [
                f"{stats.macro_defs} of {stats.macro_defs + stats.decl_lines} significant lines "
                f"are macro definitions (threshold {threshold:g})"
            ]
        else:
            result = None if compile_results is None else compile_results.get(r.path)
            if compile_results is not None and result is None:
                cls, evidence, unchecked = Classification.STANDALONE, ["unchecked"], True
            elif result is not None and not result.succeeded:
                cls = Classification.INCOMPLETE
                missing = result.missing_includes
                if result.spawn_failed:
                    evidence = ["spawn-failed"]
                else:
                    evidence = ["standalone compile failed"]
                evidence += [f"missing include: {m}" for m in missing]
            else:
                cls, evidence = Classification.STANDALONE, []
        out.append(
            replace(
                r,
                classification=cls,
                evidence=tuple(evidence),
                missing_includes=tuple(missing),
                unchecked=unchecked,
                warnings=warnings,
            )
        )
    return out


def standalone_check_plan(
    headers: Iterable[str], command_template: str, out_dir: str | None = None
) -> list[CheckCommand]:
    """One compiler invocation per header, sorted by path.

    ``{header}`` is replaced by the shell-quoted header path; ``{out}`` (if
    present) by a per-header output file in ``out_dir`` or the null device.
    """
    if "{header}" not in command_template:
        raise SanitizerError("check command template must contain the {header} placeholder")
    plan = []
    for header in sorted(set(headers)):
        if out_dir is not None:
            out = os.path.join(out_dir, re.sub(r"[^A-Za-z0-9_]+", "_", header.strip("/")) + ".pch")
        else:
            out = os.devnull
        cmd = command_template.replace("{header}", shlex.quote(header)).replace("{out}", shlex.quote(out))
        plan.append(CheckCommand(header, cmd))
    return plan


def parse_missing_includes(diagnostics: str, pattern: str | re.Pattern = DEFAULT_MISSING_INCLUDE_PATTERN) -> tuple[str, ...]:
    regex = re.compile(pattern, re.M) if isinstance(pattern, str) else pattern
    found: list[str] = []
    for m in regex.finditer(diagnostics):
        groups = [g for g in m.groups() if g] or [m.group(0)]
        if groups[0] not in found:
            found.append(groups[0])
    return tuple(found)


Executor = Callable[[str], "tuple[int, str]"]


def subprocess_executor(command: str) -> tuple[int, str]:
    proc = subprocess.run(shlex.split(command), capture_output=True, text=True)
    return proc.returncode, proc.stderr


def run_standalone_checks(
    plan: Sequence[CheckCommand],
    executor: Executor = subprocess_executor,
    parallelism: int = 1,
    missing_include_pattern: str = DEFAULT_MISSING_INCLUDE_PATTERN,
) -> list[CompileCheckResult]:
    """Execute the plan with at most ``parallelism`` commands in flight.

    Results are returned in plan order whatever the completion order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    regex = re.compile(missing_include_pattern, re.M)

    def run_one(cmd: CheckCommand) -> CompileCheckResult:
        try:
            status, stderr = executor(cmd.command)
        except OSError as exc:
            return CompileCheckResult(
                cmd.header, False, raw_diagnostics=f"spawn-failed: {exc}", spawn_failed=True
            )
        if status == 0:
            return CompileCheckResult(cmd.header, True, raw_diagnostics=stderr)
        return CompileCheckResult(cmd.header, False, parse_missing_includes(stderr, regex), stderr)

    if parallelism == 1 or len(plan) <= 1:
        return [run_one(c) for c in plan]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run_one, plan))


def _internal_edges(graph: IncludeGraph, members: frozenset[str]) -> list[tuple[str, str]]:
    return sorted({(a, b) for a in members for b in graph.successors[a] if b in members})


def _simple_cycles(nodes: list[str], edges: list[tuple[str, str]], limit: int) -> list[list[tuple[str, str]]]:
    """Up to ``limit`` elementary cycles, each as its list of edges.

    Each cycle is found once, rooted at its smallest node.
    """
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
    cycles: list[list[tuple[str, str]]] = []
    for start in sorted(nodes):
        path = [start]
        on_path = {start}
        stack = [iter(succ[start])]
        while stack:
            if len(cycles) >= limit:
                return cycles
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if nxt == start:
                cyc = path + [start]
                cycles.append(list(zip(cyc, cyc[1:])))
            elif nxt > start and nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                stack.append(iter(succ[nxt]))
    return cycles


def _exact_breaks(nodes: list[str], edges: list[tuple[str, str]]) -> list[tuple[str, str]]:
    # combinations() over the sorted edge list yields subsets in lexicographic
    # order, so the first hit at each size is the lexicographic tie-break.
    for k in range(len(edges) + 1):
        for removed in itertools.combinations(edges, k):
            gone = set(removed)
            if digraph.is_acyclic(nodes, (e for e in edges if e not in gone)):
                return list(removed)
    raise AssertionError("removing every edge always leaves an acyclic graph")


def _greedy_breaks(nodes: list[str], edges: list[tuple[str, str]], cycle_limit: int) -> list[tuple[str, str]]:
    remaining = list(edges)
    removed: list[tuple[str, str]] = []
    while not digraph.is_acyclic(nodes, remaining):
        counts = Counter(e for cyc in _simple_cycles(nodes, remaining, cycle_limit) for e in cyc)
        best = min(counts, key=lambda e: (-counts[e], e))
        removed.append(best)
        remaining.remove(best)
    # Drop removals made redundant by later ones.
    for e in reversed(list(removed)):
        if digraph.is_acyclic(nodes, remaining + [e]):
            remaining.append(e)
            removed.remove(e)
    return sorted(removed)


def suggest_cycle_breaks(
    graph: IncludeGraph,
    scc: Iterable[str],
    exact_edge_limit: int = 10,
    cycle_limit: int = 10_000,
) -> list[CycleBreak]:
    """Include edges whose removal makes the component acyclic.

    Components with at most ``exact_edge_limit`` internal edges get a
    minimum-size answer by exhaustive search. Larger ones use a greedy pass
    that repeatedly removes the edge lying on the most elementary cycles
    (counting stops after ``cycle_limit`` cycles), then re-adds any removal
    that turned out unnecessary. Ties go to the lexicographically smaller
    ``(from, to)`` edge.
    """
    members = frozenset(scc)
    if len(members) < 2:
        raise SanitizerError("cycle breaking needs a component with at least two headers")
    missing = [m for m in members if m not in graph.nodes]
    if missing:
        raise SanitizerError("component members not in graph: " + ", ".join(sorted(missing)))
    nodes = sorted(members)
    edges = _internal_edges(graph, members)
    if len(edges) <= exact_edge_limit:
        chosen = _exact_breaks(nodes, edges)
    else:
        chosen = _greedy_breaks(nodes, edges, cycle_limit)
    return [CycleBreak(a, b) for a, b in sorted(chosen)]
