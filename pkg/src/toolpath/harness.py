"""Challenge protocols: context assembly, the agent turn loop and scoring."""

from __future__ import annotations

import logging
import threading
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .connectors import Connector, parse_reply
from .errors import ConnectorError, MissingGoldData
from .graph import asap_schedule
from .matcher import ErrorClass, match_steps, score_task
from .metrics import ScoredTask, ptf
from .model import (
    UNRECOGNIZED_CALL,
    ChallengeMode,
    Observation,
    StepGroup,
    Task,
    TerminatedBy,
    TestCase,
    ToolCall,
    Trajectory,
    TurnOutput,
    canonical_json,
)
from .paths import step_group, tree_for_graph

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


class Role(str, Enum):
    USER = "User"
    ASSISTANT = "Assistant"
    TOOL_RESULT = "ToolResult"


@dataclass(frozen=True)
class ContextMessage:
    role: Role
    content: Any

    def to_dict(self) -> dict:
        return {"role": self.role.value, "content": self.content}

    def text(self) -> str:
        return self.content if isinstance(self.content, str) else canonical_json(self.content)


@dataclass(frozen=True)
class SessionConfig:
    mode: ChallengeMode
    # None means 2 x gold calls + 2, per task
    step_budget: int | None = None
    timeout: float = DEFAULT_TIMEOUT
    seed: int = 0

    def budget_for(self, task: Task) -> int:
        if self.step_budget is not None:
            return self.step_budget
        return 2 * task.gold_call_count + 2


@dataclass
class CaseResult:
    case_id: str
    mode: ChallengeMode
    tasks: list[ScoredTask]
    transcript: list[dict] = field(default_factory=list)

    @property
    def protocol_errors(self) -> int:
        return sum(t.result.error is ErrorClass.PROTOCOL_ERROR for t in self.tasks)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "mode": self.mode.value,
            "tasks": [t.to_dict() for t in self.tasks],
            "transcript": self.transcript,
        }


# ---------------------------------------------------------------------------
# Static environment
# ---------------------------------------------------------------------------


def observation_for(task: Task, call: ToolCall) -> Observation:
    return task.scripted_observations.get(call.key, UNRECOGNIZED_CALL)


def gold_steps(task: Task) -> list[StepGroup]:
    """The annotated gold order: every eligible call issued as early as possible."""
    if task.gold_graph is None:
        return []
    return [step_group(task.gold_graph.nodes, s) for s in asap_schedule(task.gold_graph)]


def _results_message(task: Task, step: StepGroup) -> ContextMessage:
    return ContextMessage(
        Role.TOOL_RESULT,
        [{"name": c.tool, **observation_for(task, c).to_dict()} for c in step],
    )


def _calls_message(step: StepGroup) -> ContextMessage:
    return ContextMessage(Role.ASSISTANT, {"tool_calls": step.to_list()})


def assemble_context(case: TestCase, mode: ChallengeMode, task_index: int) -> list[ContextMessage]:
    """History of the prior tasks followed by the current user task.

    The redacted history keeps only each prior user text and its summary; the
    injected and full-execution modes also replay the gold calls and their
    observations between them.
    """
    mode = ChallengeMode(mode)
    if not 0 <= task_index < len(case.tasks):
        raise IndexError(f"task {task_index} out of range for case {case.id}")
    messages: list[ContextMessage] = []
    for i, prior in enumerate(case.tasks[:task_index]):
        if not prior.gold_summary:
            raise MissingGoldData(f"{case.id} task {i} has no gold summary")
        if prior.gold_policy.is_tool_policy and prior.gold_graph is None:
            raise MissingGoldData(f"{case.id} task {i} has no gold graph")
        messages.append(ContextMessage(Role.USER, prior.user_text))
        if mode is not ChallengeMode.C2_REDACTED_HISTORY:
            for step in gold_steps(prior):
                messages.append(_calls_message(step))
                messages.append(_results_message(prior, step))
        messages.append(ContextMessage(Role.ASSISTANT, prior.gold_summary))
    messages.append(ContextMessage(Role.USER, case.tasks[task_index].user_text))
    return messages


# ---------------------------------------------------------------------------
# Turn loop
# ---------------------------------------------------------------------------


def run_task(
    case: TestCase,
    task_index: int,
    context: Sequence[ContextMessage],
    config: SessionConfig,
    connector: Connector,
) -> tuple[Trajectory, list[str], list[dict]]:
    """Drive one task; returns (trajectory, observation texts per step, transcript notes)."""
    task = case.tasks[task_index]
    budget = config.budget_for(task)
    messages = [m.to_dict() for m in context]
    tools = [t.to_dict() for t in case.tools]
    steps: list[TurnOutput] = []
    observed: list[str] = []
    notes: list[dict] = []
    terminated = TerminatedBy.STEP_BUDGET
    for turn in range(budget + 1):
        request = {
            "case_id": case.id,
            "task_index": task_index,
            "turn": turn,
            "env_info": case.env_info,
            "tools": tools,
            "messages": messages,
        }
        try:
            output = parse_reply(connector.request(request, config.timeout))
        except ConnectorError as exc:
            notes.append({"turn": turn, "error": type(exc).__name__, "detail": str(exc)})
            terminated = TerminatedBy.PROTOCOL_ERROR
            break
        steps.append(output)
        if output.is_text:
            terminated = TerminatedBy.TEXT_EMITTED
            break
        if turn == budget:
            break
        result = _results_message(task, output.calls)
        messages = messages + [_calls_message(output.calls).to_dict(), result.to_dict()]
        observed.append(result.text())
    trajectory = Trajectory(case.id, task_index, tuple(steps), terminated)
    return trajectory, observed, notes


def score_trajectory(
    case: TestCase,
    task_index: int,
    context: Sequence[ContextMessage],
    trajectory: Trajectory,
    observed: Sequence[str],
) -> ScoredTask:
    task = case.tasks[task_index]
    base = "\n".join(m.text() for m in context)
    tree = None
    if task.gold_policy.is_tool_policy:
        tree = tree_for_graph(task.gold_graph)
        state, _, _ = match_steps(tree, trajectory.tool_steps)
        upto = state.failure_step if state.failed else len(observed)
        base = "\n".join([base, *observed[:upto]])
    result = score_task(task, trajectory, case.tools, base, tree)
    return ScoredTask(
        case_id=case.id,
        task_index=task_index,
        gold_policy=task.gold_policy,
        result=result,
        ptf=ptf(case.policy_sequence),
        task_count=len(case.tasks),
        hiding=task.hiding,
    )


def run_case(case: TestCase, config: SessionConfig, connector: Connector) -> CaseResult:
    """Score the final task (c2/c3) or every task with gold history (c1)."""
    mode = ChallengeMode(config.mode)
    if mode is ChallengeMode.C1_FULL_EXECUTION:
        indices = range(len(case.tasks))
    else:
        indices = [len(case.tasks) - 1]
    scored, transcript = [], []
    for i in indices:
        context = assemble_context(case, mode, i)
        trajectory, observed, notes = run_task(case, i, context, config, connector)
        record = score_trajectory(case, i, context, trajectory, observed)
        scored.append(record)
        entry = {"trajectory": trajectory.to_dict(), "observations": list(observed)}
        if notes:
            entry["connector_errors"] = notes
        transcript.append(entry)
    return CaseResult(case.id, mode, scored, transcript)


def run_corpus(
    cases: Sequence[TestCase],
    config: SessionConfig,
    connector_factory: Callable[[], Connector],
    workers: int = 1,
) -> list[CaseResult]:
    """Run every case; each worker owns one connector session at a time."""
    if workers <= 1:
        with connector_factory() as connector:
            return [run_case(c, config, connector) for c in cases]

    local = threading.local()
    opened: list[Connector] = []
    lock = threading.Lock()

    def work(case: TestCase) -> CaseResult:
        conn = getattr(local, "connector", None)
        if conn is None:
            conn = local.connector = connector_factory()
            with lock:
                opened.append(conn)
        return run_case(case, config, conn)

    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, cases))
    finally:
        for conn in opened:
            conn.close()


def flatten(results: Sequence[CaseResult]) -> list[ScoredTask]:
    return [t for r in results for t in r.tasks]
