import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DECK_EDGES
from oracles import graph, indegree_frontier, random_dag
from toolpath.errors import CyclicDependency, IndexOutOfRange, InvalidVisitedSet, SelfEdge
from toolpath.graph import asap_schedule, build_graph, derive_policy_subtype, frontier
from toolpath.model import MULTI_SUBTYPES, PolicyType, ToolCall


def test_build_deck(deck_graph):
    assert len(deck_graph) == 4
    assert deck_graph.edges == frozenset(DECK_EDGES)
    assert deck_graph.predecessors(3) == {0, 2}


def test_build_single_node():
    g = build_graph([ToolCall("a")], [])
    assert len(g) == 1 and not g.edges


def test_two_cycle_is_rejected():
    with pytest.raises(CyclicDependency) as info:
        build_graph([ToolCall("a"), ToolCall("b")], [(0, 1), (1, 0)])
    cycle = info.value.cycle
    assert cycle[0] == cycle[-1] and set(cycle) == {0, 1}


def test_longer_cycle_is_reported():
    with pytest.raises(CyclicDependency) as info:
        graph(4, [(0, 1), (1, 2), (2, 3), (3, 1)])
    assert set(info.value.cycle) == {1, 2, 3}


def test_bad_edges():
    with pytest.raises(IndexOutOfRange):
        graph(2, [(0, 2)])
    with pytest.raises(SelfEdge):
        graph(2, [(1, 1)])


def test_duplicate_calls_are_distinct_nodes():
    a = ToolCall("get", {"x": 1})
    g = build_graph([a, a], [])
    assert len(g) == 2


@pytest.mark.parametrize(
    "visited, expected",
    [(set(), {0, 1}), ({1}, {0, 2}), ({0, 1, 2}, {3}), ({0, 1, 2, 3}, set())],
)
def test_deck_frontier(deck_graph, visited, expected):
    assert frontier(deck_graph, visited) == expected
    assert indegree_frontier(4, DECK_EDGES, visited) == expected


def test_frontier_rejects_non_downward_closed(deck_graph):
    with pytest.raises(InvalidVisitedSet):
        frontier(deck_graph, {2})
    with pytest.raises(InvalidVisitedSet):
        frontier(deck_graph, {9})


def _valid_visited(g, rng):
    visited = set()
    for _ in range(rng.randint(0, len(g))):
        options = sorted(frontier(g, visited))
        if not options:
            break
        visited.add(rng.choice(options))
    return visited


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_frontier_matches_indegree_oracle_and_is_nonempty(seed):
    rng = random.Random(seed)
    n, edges = random_dag(rng)
    g = graph(n, edges)
    visited = _valid_visited(g, rng)
    got = frontier(g, visited)
    assert got == indegree_frontier(n, edges, visited)
    assert bool(got) == (len(visited) < n)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_frontier_monotonicity(seed):
    rng = random.Random(seed)
    n, edges = random_dag(rng)
    g = graph(n, edges)
    visited = _valid_visited(g, rng)
    eligible = frontier(g, visited)
    for node in eligible:
        after = frontier(g, visited | {node})
        assert eligible - {node} <= after


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_subtype_total_and_coarse_multi(seed):
    n, edges = random_dag(random.Random(seed))
    p = derive_policy_subtype(graph(n, edges))
    if n == 1:
        assert p is PolicyType.SINGLE
    else:
        assert p in MULTI_SUBTYPES and p.coarse is PolicyType.MULTI


def test_asap_schedule_deck(deck_graph):
    assert asap_schedule(deck_graph) == [(0, 1), (2,), (3,)]
