"""Incremental matching of agent trajectories against a decision tree."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

from .model import PolicyType, StepGroup, Task, TerminatedBy, ToolCall, ToolSpec, Trajectory
from .paths import DecisionTree, TreeNode, tree_for_graph


class ErrorClass(str, Enum):
    TOOL_ERROR = "ToolError"
    PARAM_NAME_HALLUCINATION = "ParamNameHallucination"
    PARAM_VALUE_HALLUCINATION = "ParamValueHallucination"
    PARAM_VALUE_ERROR = "ParamValueError"
    PROTOCOL_ERROR = "ProtocolError"


@dataclass(frozen=True)
class MatchState:
    node: TreeNode
    matched_calls: int = 0
    steps_taken: int = 0
    failed: bool = False
    failure_step: int | None = None


@dataclass(frozen=True)
class MatchResult:
    correct: bool
    ap: float
    optimal: bool
    failure_step: int | None = None
    error: ErrorClass | None = None

    def to_dict(self) -> dict:
        return {
            "correct": self.correct,
            "ap": self.ap,
            "optimal": self.optimal,
            "failure_step": self.failure_step,
            "error": self.error.value if self.error else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> MatchResult:
        error = d.get("error")
        return cls(
            bool(d["correct"]),
            float(d["ap"]),
            bool(d["optimal"]),
            d.get("failure_step"),
            ErrorClass(error) if error else None,
        )


def start(tree: DecisionTree) -> MatchState:
    return MatchState(tree.root)


def advance(state: MatchState, tree: DecisionTree, step: StepGroup) -> MatchState:
    """Descend along ``step`` or record a failure at the current step index."""
    if state.failed:
        raise ValueError("cannot advance a failed match")
    child = state.node.child(step)
    if child is None:
        return replace(state, failed=True, failure_step=state.steps_taken)
    return MatchState(child, state.matched_calls + len(step), state.steps_taken + 1)


def finalize(
    state: MatchState,
    tree: DecisionTree,
    trajectory: Trajectory | None = None,
    optimal_length: int | None = None,
) -> MatchResult:
    if optimal_length is None:
        optimal_length = tree.optimal_length
    total = tree.total_calls
    ap = state.matched_calls / total if total else 0.0
    correct = (
        not state.failed
        and state.node.terminal
        and state.matched_calls == total
        and (trajectory is None or trajectory.terminated_by is TerminatedBy.TEXT_EMITTED)
    )
    if correct:
        return MatchResult(True, 1.0, state.steps_taken == optimal_length)
    return MatchResult(False, ap, False, state.failure_step)


# ---------------------------------------------------------------------------
# Error taxonomy
# ---------------------------------------------------------------------------


def _leaves(value: Any) -> Iterator[Any]:
    if isinstance(value, Mapping):
        for v in value.values():
            yield from _leaves(v)
    elif isinstance(value, list):
        for v in value:
            yield from _leaves(v)
    else:
        yield value


def _render(value: Any) -> str:
    return value if isinstance(value, str) else json.dumps(value)


def classify_error(
    bad_call: ToolCall,
    expected: Sequence[StepGroup],
    schemas: Mapping[str, ToolSpec] | Iterable[ToolSpec],
    context_text: str,
) -> ErrorClass:
    if not isinstance(schemas, Mapping):
        schemas = {s.name: s for s in schemas}
    candidates = [c for group in expected for c in group if c.tool == bad_call.tool]
    if not candidates:
        return ErrorClass.TOOL_ERROR
    spec = schemas.get(bad_call.tool)
    known = spec.parameters if spec is not None else {}
    if any(key not in known for key in bad_call.arguments):
        return ErrorClass.PARAM_NAME_HALLUCINATION
    gold = {_render(leaf) for c in candidates for leaf in _leaves(c.arguments)}
    context = context_text.lower()
    for leaf in _leaves(bad_call.arguments):
        rendered = _render(leaf)
        if rendered not in gold and rendered.lower() not in context:
            return ErrorClass.PARAM_VALUE_HALLUCINATION
    return ErrorClass.PARAM_VALUE_ERROR


def offending_call(step: StepGroup, expected: Sequence[StepGroup]) -> ToolCall:
    """First call (in canonical order) absent from every expected step."""
    known = {c.key for group in expected for c in group}
    for call in step:
        if call.key not in known:
            return call
    return step.calls[0]


# ---------------------------------------------------------------------------
# Whole-task scoring
# ---------------------------------------------------------------------------


def match_steps(tree: DecisionTree, steps: Iterable[StepGroup]) -> tuple[MatchState, StepGroup | None, list[StepGroup]]:
    """Run ``advance`` over ``steps``; returns (state, failing step, its expected edges)."""
    state = start(tree)
    for step in steps:
        expected = state.node.expected()
        state = advance(state, tree, step)
        if state.failed:
            return state, step, expected
    return state, None, []


def score_tool_task(
    tree: DecisionTree,
    trajectory: Trajectory,
    tools: Iterable[ToolSpec],
    context_text: str = "",
) -> MatchResult:
    state, bad_step, expected = match_steps(tree, trajectory.tool_steps)
    result = finalize(state, tree, trajectory)
    if result.correct:
        return result
    if trajectory.terminated_by is not TerminatedBy.TEXT_EMITTED:
        # budget overruns and broken replies dominate any mismatch seen on the way
        return replace(result, failure_step=state.failure_step if state.failed else state.steps_taken,
                       error=ErrorClass.PROTOCOL_ERROR)
    if bad_step is not None:
        call = offending_call(bad_step, expected)
        return replace(result, error=classify_error(call, expected, tools, context_text))
    # stopped with text before finishing the path: a missing call is a policy error
    return replace(result, failure_step=state.steps_taken, error=ErrorClass.TOOL_ERROR)


def score_text_task(task: Task, trajectory: Trajectory) -> MatchResult:
    """Chat/Clarify gold: the reply must be text; Clarify must name a missing parameter."""
    if trajectory.terminated_by is not TerminatedBy.TEXT_EMITTED:
        return MatchResult(False, 0.0, False, len(trajectory.tool_steps), ErrorClass.PROTOCOL_ERROR)
    if trajectory.tool_steps:
        return MatchResult(False, 0.0, False, 0, ErrorClass.TOOL_ERROR)
    text = (trajectory.final_text or "").lower()
    if task.gold_policy is PolicyType.CLARIFY:
        if not any(p.lower() in text for p in task.gold_clarify_params):
            return MatchResult(False, 0.0, False, 0, None)
    return MatchResult(True, 1.0, False)


def score_task(
    task: Task,
    trajectory: Trajectory,
    tools: Iterable[ToolSpec],
    context_text: str = "",
    tree: DecisionTree | None = None,
) -> MatchResult:
    if task.gold_policy.is_tool_policy:
        if tree is None:
            tree = tree_for_graph(task.gold_graph)
        return score_tool_task(tree, trajectory, tools, context_text)
    return score_text_task(task, trajectory)
