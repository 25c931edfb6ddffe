"""Gold tool-dependency DAGs and frontier queries."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import CyclicDependency, EmptyGraph, IndexOutOfRange, InvalidVisitedSet, SelfEdge
from .model import PolicyType, ToolCall


@dataclass(frozen=True)
class DependencyGraph:
    """Gold calls indexed ``0..n-1``; an edge ``(a, b)`` means a runs before b."""

    nodes: tuple[ToolCall, ...]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        preds: list[set[int]] = [set() for _ in self.nodes]
        for a, b in self.edges:
            preds[b].add(a)
        object.__setattr__(self, "_preds", tuple(frozenset(p) for p in preds))

    def __len__(self):
        return len(self.nodes)

    def predecessors(self, index: int) -> frozenset[int]:
        return self._preds[index]

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [list(e) for e in sorted(self.edges)],
        }


def _find_cycle(n: int, edges: Iterable[tuple[int, int]]) -> list[int] | None:
    succ: list[list[int]] = [[] for _ in range(n)]
    for a, b in sorted(edges):
        succ[a].append(b)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * n
    stack: list[int] = []

    def visit(u: int) -> list[int] | None:
        color[u] = GRAY
        stack.append(u)
        for v in succ[u]:
            if color[v] == GRAY:
                return stack[stack.index(v):] + [v]
            if color[v] == WHITE:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        color[u] = BLACK
        return None

    for u in range(n):
        if color[u] == WHITE:
            found = visit(u)
            if found:
                return found
    return None


def build_graph(nodes: Sequence[ToolCall], edges: Iterable[Sequence[int]]) -> DependencyGraph:
    """Validate and build a dependency DAG.

    Raises IndexOutOfRange, SelfEdge or CyclicDependency (carrying one cycle).
    """
    n = len(nodes)
    pairs = set()
    for edge in edges:
        a, b = (int(x) for x in edge)
        if not (0 <= a < n and 0 <= b < n):
            raise IndexOutOfRange(f"edge ({a}, {b}) out of range for {n} nodes")
        if a == b:
            raise SelfEdge(f"self edge on node {a}")
        pairs.add((a, b))
    cycle = _find_cycle(n, pairs)
    if cycle:
        raise CyclicDependency(cycle)
    return DependencyGraph(tuple(nodes), frozenset(pairs))


def frontier(graph: DependencyGraph, visited: Iterable[int] = ()) -> frozenset[int]:
    """Unvisited nodes whose direct predecessors have all been visited."""
    visited = frozenset(visited)
    n = len(graph)
    for v in visited:
        if not 0 <= v < n:
            raise InvalidVisitedSet(f"node {v} is not in the graph")
        if not graph.predecessors(v) <= visited:
            raise InvalidVisitedSet(f"node {v} visited before its prerequisites")
    return frozenset(
        i for i in range(n) if i not in visited and graph.predecessors(i) <= visited
    )


def asap_schedule(graph: DependencyGraph) -> list[tuple[int, ...]]:
    """Layered schedule that runs every eligible node as soon as possible.

    Its length is the longest dependency chain, which no valid path can beat,
    so this is always an optimal path. Used as the annotated gold order.
    """
    visited: set[int] = set()
    layers = []
    while len(visited) < len(graph):
        step = frontier(graph, visited)
        layers.append(tuple(sorted(step)))
        visited |= step
    return layers


def derive_policy_subtype(graph: DependencyGraph) -> PolicyType:
    n = len(graph)
    if n == 0:
        raise EmptyGraph("graph has no nodes")
    if n == 1:
        return PolicyType.SINGLE
    if not graph.edges:
        return PolicyType.MULTI_PARALLEL
    visited: set[int] = set()
    while len(visited) < n:
        step = frontier(graph, visited)
        if len(step) != 1:
            return PolicyType.MULTI_MIXED
        visited |= step
    return PolicyType.MULTI_SERIAL
