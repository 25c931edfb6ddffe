"""Corpus files: one TestCase per UTF-8 JSON document in a directory."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from pathlib import Path

from .errors import InvalidCase, ToolpathError
from .graph import DependencyGraph, build_graph, derive_policy_subtype
from .model import (
    MULTI_SUBTYPES,
    HidingStrategy,
    Observation,
    PolicyType,
    Task,
    TestCase,
    ToolCall,
    ToolSpec,
)


def graph_from_dict(d: Mapping | None) -> DependencyGraph | None:
    if d is None:
        return None
    return build_graph([ToolCall.from_dict(n) for n in d["nodes"]], d.get("edges", []))


def task_to_dict(task: Task) -> dict:
    observations = []
    for key in sorted(task.scripted_observations):
        tool, arguments = json.loads(key)
        observations.append(
            {
                "call": {"name": tool, "arguments": arguments},
                "observation": task.scripted_observations[key].to_dict(),
            }
        )
    return {
        "user_text": task.user_text,
        "gold_policy": task.gold_policy.value,
        "hiding": task.hiding.value,
        "gold_graph": task.gold_graph.to_dict() if task.gold_graph is not None else None,
        "gold_clarify_params": list(task.gold_clarify_params),
        "gold_summary": task.gold_summary,
        "scripted_observations": observations,
    }


def task_from_dict(d: Mapping) -> Task:
    observations = {
        ToolCall.from_dict(entry["call"]).key: Observation.from_dict(entry["observation"])
        for entry in d.get("scripted_observations", [])
    }
    return Task(
        user_text=d["user_text"],
        gold_policy=PolicyType(d["gold_policy"]),
        hiding=HidingStrategy(d.get("hiding", "None")),
        gold_graph=graph_from_dict(d.get("gold_graph")),
        gold_clarify_params=tuple(d.get("gold_clarify_params", ())),
        gold_summary=d.get("gold_summary", ""),
        scripted_observations=observations,
    )


def case_to_dict(case: TestCase) -> dict:
    return {
        "id": case.id,
        "tools": [t.to_dict() for t in case.tools],
        "tasks": [task_to_dict(t) for t in case.tasks],
        "env_info": case.env_info,
    }


def case_from_dict(d: Mapping) -> TestCase:
    try:
        return TestCase(
            id=d["id"],
            tools=tuple(ToolSpec.from_dict(t) for t in d["tools"]),
            tasks=tuple(task_from_dict(t) for t in d["tasks"]),
            env_info=d.get("env_info", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidCase(f"malformed case document: {exc!r}") from exc


def dumps_case(case: TestCase) -> str:
    return json.dumps(case_to_dict(case), ensure_ascii=False, indent=2) + "\n"


def loads_case(text: str) -> TestCase:
    return case_from_dict(json.loads(text))


def validate_case(case: TestCase) -> TestCase:
    """Check the structural invariants of a case; raises InvalidCase."""
    names = [t.name for t in case.tools]
    if len(set(names)) != len(names):
        raise InvalidCase(f"{case.id}: duplicate tool names")
    for spec in case.tools:
        for param in spec.required:
            if param not in spec.parameters:
                raise InvalidCase(f"{case.id}: {spec.name} requires unknown {param}")
    if not 1 <= len(case.tasks) <= 4:
        raise InvalidCase(f"{case.id}: {len(case.tasks)} tasks, expected 1-4")
    specs = {t.name: t for t in case.tools}
    for i, task in enumerate(case.tasks):
        where = f"{case.id} task {i}"
        policy = task.gold_policy
        if policy is PolicyType.MULTI:
            raise InvalidCase(f"{where}: gold policy must name a multi subtype")
        if policy.is_tool_policy:
            graph = task.gold_graph
            if graph is None or not len(graph):
                raise InvalidCase(f"{where}: tool policy without a gold graph")
            derived = derive_policy_subtype(graph)
            if policy is PolicyType.SINGLE and len(graph) != 1:
                raise InvalidCase(f"{where}: Single needs exactly one gold call")
            if policy in MULTI_SUBTYPES and derived is not policy:
                raise InvalidCase(f"{where}: graph shape is {derived.value}, labelled {policy.value}")
            for call in graph.nodes:
                spec = specs.get(call.tool)
                if spec is None:
                    raise InvalidCase(f"{where}: gold call to unknown tool {call.tool}")
                unknown = set(call.arguments) - set(spec.parameters)
                if unknown:
                    raise InvalidCase(f"{where}: {call.tool} has unknown arguments {sorted(unknown)}")
                if call.key not in task.scripted_observations:
                    raise InvalidCase(f"{where}: no scripted observation for {call!r}")
        elif task.gold_graph is not None and len(task.gold_graph):
            raise InvalidCase(f"{where}: {policy.value} task carries a gold graph")
        if policy is PolicyType.CLARIFY and not task.gold_clarify_params:
            raise InvalidCase(f"{where}: Clarify task lists no missing parameters")
    return case


def write_corpus(cases: Iterable[TestCase], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for case in cases:
        path = directory / f"{case.id}.json"
        path.write_text(dumps_case(case), encoding="utf-8")
        written.append(path)
    return written


def load_corpus(directory: str | Path, validate: bool = True) -> list[TestCase]:
    cases = []
    for path in sorted(Path(directory).glob("*.json")):
        try:
            case = loads_case(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, ToolpathError) as exc:
            raise InvalidCase(f"{path}: {exc}") from exc
        cases.append(validate_case(case) if validate else case)
    return cases
