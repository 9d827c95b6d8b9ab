"""Module-level dependency analysis and bottom-up migration ordering.

Cost model (line based): when a header that belongs to no module is
transitively included by headers of several modules, each of those modules
persists its own copy. A header assigned to a module is persisted once.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from . import digraph
from .errors import PlanError
from .graph import IncludeGraph, NodeKind
from .manifest import LibraryManifest, is_under

ModuleAssignment = Mapping[str, str]


@dataclass(frozen=True)
class ModuleDepGraph:
    nodes: tuple[str, ...]
    edges: Mapping[tuple[str, str], int] = field(default_factory=dict)
    external: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(set(self.nodes))))
        for (a, b), mult in self.edges.items():
            if a == b:
                raise PlanError(f"module {a} cannot depend on itself")
            if a not in self.nodes or b not in self.nodes:
                raise PlanError(f"edge {a} -> {b} references an unknown module")
            if mult < 1:
                raise PlanError(f"edge {a} -> {b} has multiplicity {mult}")

    def dependencies(self, module: str) -> list[str]:
        return sorted(b for (a, b) in self.edges if a == module)


@dataclass(frozen=True)
class DuplicationEntry:
    path: str
    duplication_count: int
    duplicated_lines: int
    mapped: bool


@dataclass(frozen=True)
class DuplicationReport:
    entries: tuple[DuplicationEntry, ...]

    @property
    def total_duplicated_lines(self) -> int:
        return sum(e.duplicated_lines for e in self.entries)

    @property
    def redundant_lines(self) -> int:
        """Lines persisted more than once, i.e. the saving of mapping every offender."""
        return sum((e.duplication_count - 1) * (e.duplicated_lines // e.duplication_count)
                   for e in self.entries if e.duplication_count > 1)

    @property
    def offenders(self) -> list[DuplicationEntry]:
        return [e for e in self.entries if e.duplication_count >= 2]

    def count(self, path: str) -> int:
        for e in self.entries:
            if e.path == path:
                return e.duplication_count
        raise KeyError(path)


@dataclass(frozen=True)
class MigrationPlan:
    order: tuple[str, ...]
    cycle_groups: tuple[tuple[str, ...], ...] = ()
    external_first: bool = True
    ranks: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class CostEstimate:
    textual_lines: int
    modular_lines: int


def _check_assignment(graph: IncludeGraph, assignment: ModuleAssignment) -> None:
    unknown = sorted(p for p in assignment if p not in graph.nodes)
    if unknown:
        raise PlanError("assignment references headers outside the graph: " + ", ".join(unknown))


def module_dependency_graph(
    graph: IncludeGraph,
    assignment: ModuleAssignment,
    external: frozenset[str] | Iterable[str] = frozenset(),
    modules: Iterable[str] = (),
) -> ModuleDepGraph:
    """Lift direct header includes to module edges.

    ``external`` names the modules in ``assignment`` that are external
    pseudo-modules; ``modules`` adds nodes for modules with no headers.
    Includes of unassigned headers produce no edge.
    """
    _check_assignment(graph, assignment)
    edges: dict[tuple[str, str], int] = defaultdict(int)
    pairs = {(e.source, e.target) for e in graph.edges}
    for src, dst in pairs:
        a, b = assignment.get(src), assignment.get(dst)
        if a is not None and b is not None and a != b:
            edges[(a, b)] += 1
    return ModuleDepGraph(tuple(set(assignment.values()) | set(modules)), dict(edges), frozenset(external))


def _module_closures(graph: IncludeGraph, assignment: ModuleAssignment) -> dict[str, set[str]]:
    members: dict[str, list[str]] = defaultdict(list)
    for path, module in assignment.items():
        members[module].append(path)
    closures = {}
    for module, paths in members.items():
        reach: set[str] = set()
        for p in paths:
            reach |= digraph.strictly_reachable(graph.successors, p)
        closures[module] = reach
    return closures


def duplication_report(
    graph: IncludeGraph, assignment: ModuleAssignment, line_counts: Mapping[str, int]
) -> DuplicationReport:
    """How many module copies each header's content ends up in.

    Mapped headers count once. An unmapped header counts once per module
    whose headers transitively include it.
    """
    _check_assignment(graph, assignment)
    closures = _module_closures(graph, assignment)
    entries = []
    for h in graph.headers:
        if h in assignment:
            count = 1
        else:
            count = sum(1 for reach in closures.values() if h in reach)
        entries.append(DuplicationEntry(h, count, count * line_counts.get(h, 0), h in assignment))
    entries.sort(key=lambda e: (-e.duplicated_lines, e.path))
    return DuplicationReport(tuple(entries))


def external_root(path: str, manifest: LibraryManifest) -> str:
    """Deepest search path containing ``path``; its directory when none does."""
    best = None
    for sp in manifest.search_paths:
        if is_under(path, sp) and path != sp and (best is None or len(sp) > len(best)):
            best = sp
    return best if best is not None else path.rsplit("/", 1)[0] or "/"


def detect_external_candidates(
    graph: IncludeGraph,
    manifest: LibraryManifest,
    assignment: ModuleAssignment | None = None,
) -> dict[str, frozenset[str]]:
    """External headers that some module transitively includes, grouped by root.

    A header is external when it lies outside every library's interface
    directory. ``assignment`` defaults to "every interface header is mapped".
    """
    if assignment is None:
        mapped = [h for h in manifest.interface_headers() if h in graph.nodes]
    else:
        mapped = [h for h in assignment if h in graph.nodes]
    reach: set[str] = set()
    for h in mapped:
        reach |= digraph.strictly_reachable(graph.successors, h)
    groups: dict[str, set[str]] = defaultdict(set)
    for h in sorted(reach):
        if graph.nodes[h] is not NodeKind.HEADER or manifest.owning_libraries(h):
            continue
        groups[external_root(h, manifest)].add(h)
    return {root: frozenset(paths) for root, paths in sorted(groups.items())}


def default_external_name(root: str) -> str:
    return f"external:{root}"


def external_assignment(
    groups: Mapping[str, Iterable[str]], name: Callable[[str], str] = default_external_name
) -> dict[str, str]:
    return {h: name(root) for root, paths in groups.items() for h in paths}


def bottom_up_order(dep: ModuleDepGraph) -> MigrationPlan:
    """Dependencies first, layered by height in the SCC condensation.

    A component's rank is 0 when it depends on nothing and otherwise one more
    than the highest rank among its dependencies. Components are emitted by
    rank; within a rank external pseudo-modules come first, then names in
    lexicographic order. Mutually dependent modules form a cycle group and
    are emitted together.
    """
    succ: dict[str, list[str]] = {n: [] for n in dep.nodes}
    for a, b in dep.edges:
        succ[a].append(b)
    for n in succ:
        succ[n].sort()
    comps = digraph.strongly_connected_components(dep.nodes, succ.__getitem__)
    comp_of = {m: i for i, comp in enumerate(comps) for m in comp}
    # Tarjan emits dependencies before dependents, so one pass fixes ranks.
    rank: dict[int, int] = {}
    for i, comp in enumerate(comps):
        deps = {comp_of[d] for m in comp for d in succ[m]} - {i}
        rank[i] = 1 + max((rank[d] for d in deps), default=-1)

    def sort_key(i: int):
        members = comps[i]
        is_external = all(m in dep.external for m in members)
        return rank[i], not is_external, min(members)

    order: list[str] = []
    groups: list[tuple[str, ...]] = []
    module_rank: dict[str, int] = {}
    for i in sorted(range(len(comps)), key=sort_key):
        members = tuple(sorted(comps[i]))
        if len(members) > 1:
            groups.append(members)
        order.extend(members)
        for m in members:
            module_rank[m] = rank[i]
    positions = {m: k for k, m in enumerate(order)}
    last_external = max((positions[m] for m in dep.external if m in positions), default=-1)
    first_internal = min((positions[m] for m in order if m not in dep.external), default=len(order))
    return MigrationPlan(
        order=tuple(order),
        cycle_groups=tuple(sorted(groups)),
        external_first=last_external < first_internal,
        ranks=module_rank,
    )


def parse_cost_estimate(
    graph: IncludeGraph, assignment: ModuleAssignment, line_counts: Mapping[str, int]
) -> CostEstimate:
    """Lines parsed with textual inclusion versus with modules.

    Textual: every TU re-parses its own lines plus its full include closure.
    Modular: TU lines, plus each mapped header once, plus every unmapped
    header once per module that transitively includes it.
    """
    _check_assignment(graph, assignment)
    tu_lines = 0
    textual = 0
    for tu in graph.translation_units:
        tu_lines += line_counts.get(tu, 0)
        closure = digraph.strictly_reachable(graph.successors, tu) - {tu}
        textual += sum(line_counts.get(h, 0) for h in closure)
    report = duplication_report(graph, assignment, line_counts)
    mapped_lines = sum(line_counts.get(h, 0) for h in assignment)
    unmapped_lines = sum(e.duplicated_lines for e in report.entries if not e.mapped)
    return CostEstimate(textual + tu_lines, mapped_lines + unmapped_lines + tu_lines)
