"""Small directed-graph algorithms over ``node -> successors`` mappings."""

from __future__ import annotations

from collections import deque
from typing import Callable, Hashable, Iterable, Mapping, TypeVar

N = TypeVar("N", bound=Hashable)


def reachable(successors: Mapping[N, Iterable[N]], starts: Iterable[N]) -> set[N]:
    """Nodes reachable from ``starts`` by one or more edges, plus the starts themselves."""
    seen = set(starts)
    queue = deque(seen)
    while queue:
        node = queue.popleft()
        for nxt in successors.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def strictly_reachable(successors: Mapping[N, Iterable[N]], start: N) -> set[N]:
    """Nodes reachable from ``start`` by a path of length >= 1."""
    seen: set[N] = set()
    queue = deque(successors.get(start, ()))
    while queue:
        node = queue.popleft()
        if node in seen:
            continue
        seen.add(node)
        queue.extend(successors.get(node, ()))
    return seen


def strongly_connected_components(
    nodes: Iterable[N], successors: Callable[[N], Iterable[N]]
) -> list[list[N]]:
    """Tarjan's algorithm, iterative so deep include chains don't hit the recursion limit.

    Components come out in reverse topological order: every component is
    emitted after all components it can reach.
    """
    index: dict[N, int] = {}
    lowlink: dict[N, int] = {}
    on_stack: set[N] = set()
    stack: list[N] = []
    result: list[list[N]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = lowlink[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(successors(nxt))))
                    advanced = True
                    break
                if nxt in on_stack:
                    lowlink[node] = min(lowlink[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                result.append(component)
    return result


def is_acyclic(nodes: Iterable[N], edges: Iterable[tuple[N, N]]) -> bool:
    """Kahn's algorithm; self-loops count as cycles."""
    indeg: dict[N, int] = {n: 0 for n in nodes}
    succ: dict[N, list[N]] = {n: [] for n in indeg}
    for a, b in edges:
        indeg.setdefault(a, 0)
        succ.setdefault(a, [])
        succ.setdefault(b, [])
        indeg[b] = indeg.get(b, 0) + 1
        succ[a].append(b)
    queue = deque(n for n, d in indeg.items() if d == 0)
    done = 0
    while queue:
        n = queue.popleft()
        done += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return done == len(indeg)
