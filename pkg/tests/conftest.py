import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toolpath.fixtures import generate_corpus  # noqa: E402
from toolpath.graph import build_graph  # noqa: E402
from toolpath.model import ToolCall  # noqa: E402
from toolpath.paths import build_decision_tree, enumerate_paths  # noqa: E402

# [0] create deck, [1] movie rank, [2] details needs [1], [3] slide needs [0] and [2]
DECK_EDGES = [(1, 2), (0, 3), (2, 3)]


def deck_calls():
    return [
        ToolCall("createPresentation", {"title": "Popular movies"}),
        ToolCall("getMovieRank", {"top": 1}),
        ToolCall("getMovieDetails", {"movie_id": "m-1"}),
        ToolCall("addSlide", {"presentation_id": "p-1", "content": "Movie"}),
    ]


@pytest.fixture
def deck_nodes():
    return deck_calls()


@pytest.fixture
def deck_graph(deck_nodes):
    return build_graph(deck_nodes, DECK_EDGES)


@pytest.fixture
def deck_tree(deck_graph):
    return build_decision_tree(enumerate_paths(deck_graph), deck_graph.nodes)


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus((2, 3, 4), 1, seed=7)
