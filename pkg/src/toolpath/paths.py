"""Execution-path enumeration over a dependency DAG, and the matching trie.

A path is a sequence of steps; each step is a non-empty subset of the nodes
eligible at that point, run in parallel. Enumeration is a depth-first walk
that, at every frontier, branches on every non-empty subset of it.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from itertools import combinations

from .errors import GraphTooLarge
from .graph import DependencyGraph, frontier
from .model import StepGroup, ToolCall

DEFAULT_MAX_NODES = 12

Step = tuple[int, ...]


@dataclass(frozen=True)
class ExecutionPath:
    steps: tuple[Step, ...]

    @property
    def length(self) -> int:
        return len(self.steps)

    def to_list(self) -> list[list[int]]:
        return [list(s) for s in self.steps]


@dataclass(frozen=True)
class PathSet:
    paths: tuple[ExecutionPath, ...]
    optimal_length: int

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def step_sets(self) -> set[tuple[frozenset[int], ...]]:
        return {tuple(frozenset(s) for s in p.steps) for p in self.paths}


def _subsets(nodes: Sequence[int]) -> Iterator[Step]:
    # ascending cardinality, then lexicographic
    for size in range(1, len(nodes) + 1):
        yield from combinations(nodes, size)


def enumerate_paths(graph: DependencyGraph, max_nodes: int = DEFAULT_MAX_NODES) -> PathSet:
    n = len(graph)
    if n > max_nodes:
        raise GraphTooLarge(f"{n} nodes exceeds the enumeration cap of {max_nodes}")
    if n == 0:
        raise ValueError("cannot enumerate paths of an empty graph")

    found: list[tuple[Step, ...]] = []
    current: list[Step] = []

    def walk(visited: frozenset[int]) -> None:
        if len(visited) == n:
            found.append(tuple(current))
            return
        for step in _subsets(sorted(frontier(graph, visited))):
            current.append(step)
            walk(visited | frozenset(step))
            current.pop()

    walk(frozenset())
    found.sort()
    paths = tuple(ExecutionPath(p) for p in found)
    return PathSet(paths, min(p.length for p in paths))


def classify_paths(path_set: PathSet) -> tuple[list[ExecutionPath], list[ExecutionPath]]:
    optimal = [p for p in path_set if p.length == path_set.optimal_length]
    suboptimal = [p for p in path_set if p.length != path_set.optimal_length]
    return optimal, suboptimal


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TreeNode:
    matched_calls: int = 0
    terminal: bool = False
    # index-level paths passing through this node
    path_count: int = 0
    children: dict[tuple[str, ...], TreeNode] = field(default_factory=dict)
    groups: dict[tuple[str, ...], StepGroup] = field(default_factory=dict)

    def child(self, step: StepGroup) -> TreeNode | None:
        return self.children.get(step.key)

    def expected(self) -> list[StepGroup]:
        return [self.groups[k] for k in sorted(self.groups)]

    def terminals(self) -> int:
        own = 1 if self.terminal else 0
        return own + sum(c.terminals() for c in self.children.values())

    def sequences(self, prefix=()) -> Iterator[tuple[StepGroup, ...]]:
        if self.terminal:
            yield prefix
        for key in sorted(self.children):
            yield from self.children[key].sequences(prefix + (self.groups[key],))


@dataclass
class DecisionTree:
    root: TreeNode
    total_calls: int
    optimal_length: int

    def sequences(self) -> list[tuple[StepGroup, ...]]:
        return list(self.root.sequences())

    @property
    def terminal_count(self) -> int:
        return self.root.terminals()


def step_group(nodes: Sequence[ToolCall], step: Step) -> StepGroup:
    return StepGroup(tuple(nodes[i] for i in step))


def build_decision_tree(path_set: PathSet, nodes: Sequence[ToolCall]) -> DecisionTree:
    """Build a trie keyed by call-level step groups.

    Index-level paths that emit identical calls (duplicate gold nodes) share
    trie edges, so the terminal count can be lower than ``len(path_set)``.
    """
    root = TreeNode()
    for path in path_set:
        node = root
        node.path_count += 1
        for step in path.steps:
            group = step_group(nodes, step)
            nxt = node.children.get(group.key)
            if nxt is None:
                nxt = TreeNode(matched_calls=node.matched_calls + len(group))
                node.children[group.key] = nxt
                node.groups[group.key] = group
            node = nxt
            node.path_count += 1
        node.terminal = True
    return DecisionTree(root, len(nodes), path_set.optimal_length)


def tree_for_graph(graph: DependencyGraph, max_nodes: int = DEFAULT_MAX_NODES) -> DecisionTree:
    return build_decision_tree(enumerate_paths(graph, max_nodes), graph.nodes)


def dump_paths(graph: DependencyGraph, max_nodes: int = DEFAULT_MAX_NODES) -> dict:
    """Structured audit record of a graph's path set and trie."""
    path_set = enumerate_paths(graph, max_nodes)
    optimal, suboptimal = classify_paths(path_set)
    tree = build_decision_tree(path_set, graph.nodes)

    def node_doc(node: TreeNode) -> dict:
        return {
            "matched_calls": node.matched_calls,
            "terminal": node.terminal,
            "children": [
                {"step": node.groups[k].to_list(), "node": node_doc(node.children[k])}
                for k in sorted(node.children)
            ],
        }

    return {
        "graph": graph.to_dict(),
        "optimal_length": path_set.optimal_length,
        "optimal": [p.to_list() for p in optimal],
        "suboptimal": [p.to_list() for p in suboptimal],
        "tree": node_doc(tree.root),
    }
