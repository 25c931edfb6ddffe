import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_paths, graph, random_dag
from toolpath.graph import build_graph
from toolpath.matcher import (
    ErrorClass,
    advance,
    classify_error,
    finalize,
    match_steps,
    score_text_task,
    score_tool_task,
    start,
)
from toolpath.model import PolicyType, StepGroup, Task, TerminatedBy, ToolCall, ToolSpec, Trajectory, TurnOutput
from toolpath.paths import build_decision_tree, enumerate_paths, step_group, tree_for_graph


def steps_of(nodes, *index_steps):
    return [step_group(nodes, s) for s in index_steps]


def trajectory(steps, text="done", terminated=TerminatedBy.TEXT_EMITTED):
    outs = [TurnOutput.tool_calls(s) for s in steps]
    if text is not None:
        outs.append(TurnOutput.reply(text))
    return Trajectory("case", 0, tuple(outs), terminated)


def run(tree, steps):
    state, _, _ = match_steps(tree, steps)
    return finalize(state, tree, trajectory(steps))


def test_advance_along_valid_prefix(deck_tree, deck_nodes):
    state = start(deck_tree)
    state = advance(state, deck_tree, step_group(deck_nodes, (1,)))
    assert not state.failed and state.matched_calls == 1
    state = advance(state, deck_tree, step_group(deck_nodes, (0,)))
    assert not state.failed and state.matched_calls == 2


def test_advance_fails_on_node_3_first(deck_tree, deck_nodes):
    state = advance(start(deck_tree), deck_tree, step_group(deck_nodes, (3,)))
    assert state.failed and state.failure_step == 0 and state.matched_calls == 0
    with pytest.raises(ValueError):
        advance(state, deck_tree, step_group(deck_nodes, (0,)))


def test_finalize_optimal_traversal(deck_tree, deck_nodes):
    result = run(deck_tree, steps_of(deck_nodes, (0, 1), (2,), (3,)))
    assert (result.correct, result.ap, result.optimal) == (True, 1.0, True)
    assert result.failure_step is None


def test_finalize_serial_traversal(deck_tree, deck_nodes):
    result = run(deck_tree, steps_of(deck_nodes, (1,), (0,), (2,), (3,)))
    assert (result.correct, result.ap, result.optimal) == (True, 1.0, False)


def test_finalize_failure_after_one_match(deck_tree, deck_nodes):
    result = run(deck_tree, steps_of(deck_nodes, (1,), (3,)))
    assert (result.correct, result.ap, result.failure_step) == (False, 0.25, 1)


def test_incomplete_path_is_incorrect(deck_tree, deck_nodes):
    result = run(deck_tree, steps_of(deck_nodes, (0, 1), (2,)))
    assert not result.correct and result.ap == 0.75


def test_over_calling_is_incorrect(deck_tree, deck_nodes):
    result = run(deck_tree, steps_of(deck_nodes, (0, 1), (2,), (3,), (3,)))
    assert not result.correct and result.failure_step == 3 and result.ap == 1.0


def test_budget_termination_is_protocol_error(deck_tree, deck_nodes):
    steps = steps_of(deck_nodes, (0, 1), (2,), (3,))
    traj = trajectory(steps, text=None, terminated=TerminatedBy.STEP_BUDGET)
    result = score_tool_task(deck_tree, traj, [])
    assert not result.correct and result.error is ErrorClass.PROTOCOL_ERROR


def test_duplicate_gold_calls_any_bijection():
    a = ToolCall("get", {"x": 1})
    tree = tree_for_graph(build_graph([a, a], []))
    one = StepGroup((a,))
    assert run(tree, [one, one]).correct
    assert run(tree, [StepGroup((a, a))]).optimal
    assert not run(tree, [one]).correct


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matcher_agrees_with_path_membership(seed):
    rng = random.Random(seed)
    n, edges = random_dag(rng, max_nodes=5)
    g = graph(n, edges)
    tree = build_decision_tree(enumerate_paths(g), g.nodes)
    oracle = brute_force_paths(n, edges)
    valid = sorted(oracle, key=lambda p: [sorted(b) for b in p])
    for _ in range(20):
        if rng.random() < 0.5:
            seq = list(rng.choice(valid))
        else:
            seq = [frozenset(rng.sample(range(n), rng.randint(1, n))) for _ in range(rng.randint(1, n))]
        steps = [step_group(g.nodes, tuple(sorted(b))) for b in seq]
        result = run(tree, steps)
        assert result.correct == (tuple(seq) in oracle)
        if result.optimal:
            assert len(seq) == min(len(p) for p in oracle)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ap_monotone_along_valid_prefixes(seed):
    rng = random.Random(seed)
    n, edges = random_dag(rng, max_nodes=5)
    g = graph(n, edges)
    tree = tree_for_graph(g)
    path = rng.choice(list(brute_force_paths(n, edges)))
    steps = [step_group(g.nodes, tuple(sorted(b))) for b in path]
    aps = [run(tree, steps[:k]).ap for k in range(len(steps) + 1)]
    assert aps == sorted(aps) and aps[-1] == 1.0


def test_serializing_agent_never_optimal_with_parallel_frontier():
    g = graph(3, [])
    tree = tree_for_graph(g)
    result = run(tree, steps_of(g.nodes, (0,), (1,), (2,)))
    assert result.correct and not result.optimal


# ---------------------------------------------------------------------------
# Error classes
# ---------------------------------------------------------------------------

FORECAST = ToolSpec("getCityForecast", "", {"city": {"type": "string", "required": True},
                                            "date": {"type": "string", "required": True}})
ALERTS = ToolSpec("getWeatherAlerts", "", {"city": {"type": "string", "required": True}})
GOLD = StepGroup((ToolCall("getCityForecast", {"city": "Chicago", "date": "2024-07-13"}),))


def test_wrong_tool():
    bad = ToolCall("getWeatherAlerts", {"city": "Chicago"})
    assert classify_error(bad, [GOLD], [FORECAST, ALERTS], "") is ErrorClass.TOOL_ERROR


def test_parameter_name_hallucination():
    bad = ToolCall("getCityForecast", {"citty": "Chicago", "date": "2024-07-13"})
    assert classify_error(bad, [GOLD], [FORECAST], "") is ErrorClass.PARAM_NAME_HALLUCINATION


def test_parameter_value_hallucination():
    bad = ToolCall("getCityForecast", {"city": "Boston", "date": "2024-07-13"})
    context = "Please help me check the weather in Chicago for the weekend."
    assert "boston" not in context.lower()
    assert classify_error(bad, [GOLD], [FORECAST], context) is ErrorClass.PARAM_VALUE_HALLUCINATION


def test_parameter_value_error_when_value_is_grounded():
    bad = ToolCall("getCityForecast", {"city": "Chicago", "date": "2024-07-20"})
    context = "Weekend in Chicago, or maybe 2024-07-20?"
    assert classify_error(bad, [GOLD], [FORECAST], context) is ErrorClass.PARAM_VALUE_ERROR
    # context match is case-insensitive
    bad = ToolCall("getCityForecast", {"city": "boston", "date": "2024-07-13"})
    assert classify_error(bad, [GOLD], [FORECAST], "BOSTON") is ErrorClass.PARAM_VALUE_ERROR


def test_multi_call_step_classifies_first_offending_call():
    g = graph(2, [])
    tree = tree_for_graph(g)
    wrong = ToolCall("zzz", {})
    step = StepGroup((g.nodes[0], wrong))
    result = score_tool_task(tree, trajectory([step]), [])
    assert result.error is ErrorClass.TOOL_ERROR and result.failure_step == 0


def test_text_instead_of_calls_is_tool_error(deck_tree):
    result = score_tool_task(deck_tree, trajectory([], text="Which city?"), [])
    assert not result.correct and result.error is ErrorClass.TOOL_ERROR and result.ap == 0.0


def test_text_tasks():
    chat = Task("hi", PolicyType.CHAT, gold_summary="hello")
    clarify = Task("book", PolicyType.CLARIFY, gold_clarify_params=("time",), gold_summary="What time?")
    assert score_text_task(chat, trajectory([], text="hello there")).correct
    assert score_text_task(clarify, trajectory([], text="What TIME suits you?")).correct
    assert not score_text_task(clarify, trajectory([], text="Sure, booked!")).correct
    called = score_text_task(chat, trajectory([StepGroup((ToolCall("x"),))]))
    assert not called.correct and called.error is ErrorClass.TOOL_ERROR
