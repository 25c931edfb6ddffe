"""Domain records shared across the engine.

Everything here is an immutable value once constructed. Tool-call arguments
are canonicalized on construction so that equality and hashing of calls,
step groups and scripted-observation keys are exact.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

from .errors import MalformedArguments

if TYPE_CHECKING:
    from .graph import DependencyGraph


class PolicyType(str, Enum):
    SINGLE = "Single"
    MULTI_SERIAL = "MultiSerial"
    MULTI_PARALLEL = "MultiParallel"
    MULTI_MIXED = "MultiMixed"
    CHAT = "Chat"
    CLARIFY = "Clarify"
    # coarse-only member: the projection target of the three multi subtypes
    MULTI = "Multi"

    @property
    def coarse(self) -> PolicyType:
        if self in MULTI_SUBTYPES or self is PolicyType.MULTI:
            return PolicyType.MULTI
        return self

    @property
    def is_tool_policy(self) -> bool:
        return self.coarse in (PolicyType.SINGLE, PolicyType.MULTI)


MULTI_SUBTYPES = frozenset(
    {PolicyType.MULTI_SERIAL, PolicyType.MULTI_PARALLEL, PolicyType.MULTI_MIXED}
)

# Ordering used for combination enumeration and report columns.
COARSE_TYPES = (PolicyType.SINGLE, PolicyType.MULTI, PolicyType.CHAT, PolicyType.CLARIFY)


def coarse(policy: PolicyType | str) -> PolicyType:
    return PolicyType(policy).coarse


class HidingStrategy(str, Enum):
    OMIT = "Omit"
    REFERENCE = "Reference"
    LONG_CONTEXT = "LongContext"
    NONE = "None"


class ChallengeMode(str, Enum):
    C1_FULL_EXECUTION = "c1"
    C2_REDACTED_HISTORY = "c2"
    C3_INJECTED_HISTORY = "c3"


class ResponseKind(str, Enum):
    TOOL_POLICY = "ToolPolicy"
    TEXT_POLICY = "TextPolicy"


class TerminatedBy(str, Enum):
    TEXT_EMITTED = "TextEmitted"
    STEP_BUDGET = "StepBudget"
    PROTOCOL_ERROR = "ProtocolError"


# ---------------------------------------------------------------------------
# Argument canonicalization
# ---------------------------------------------------------------------------


def _canonical_value(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise MalformedArguments(f"non-finite number {value!r}")
        if value.is_integer():
            return int(value)
        return value
    if isinstance(value, str):
        return value.strip()
    if isinstance(value, Mapping):
        return _canonical_mapping(value)
    if isinstance(value, (list, tuple)):
        return [_canonical_value(v) for v in value]
    raise MalformedArguments(f"unsupported argument value {value!r}")


def _canonical_mapping(mapping: Mapping) -> dict:
    out = {}
    for key in sorted(mapping):
        if not isinstance(key, str):
            raise MalformedArguments(f"argument key must be a string, got {key!r}")
        out[key] = _canonical_value(mapping[key])
    return out


def canonicalize_arguments(arguments: Mapping | str) -> dict:
    """Return the canonical form of a tool-call argument document.

    Keys are sorted at every level, strings are trimmed and integer-valued
    floats collapse to integers. A JSON string is parsed first.

    >>> canonicalize_arguments({"b": 1, "a": "x "})
    {'a': 'x', 'b': 1}
    >>> canonicalize_arguments('{"lat": 34.050000}')
    {'lat': 34.05}
    """
    if isinstance(arguments, (str, bytes)):
        try:
            arguments = json.loads(arguments)
        except json.JSONDecodeError as exc:
            raise MalformedArguments(f"arguments are not valid JSON: {exc}") from None
    if not isinstance(arguments, Mapping):
        raise MalformedArguments(
            f"arguments must be a key-value document, got {type(arguments).__name__}"
        )
    return _canonical_mapping(arguments)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Tools, calls, observations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str = ""
    # parameter name -> {"type": ..., "required": bool, ...}
    parameters: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)

    @property
    def required(self) -> list[str]:
        return sorted(p for p, d in self.parameters.items() if d.get("required"))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {k: dict(v) for k, v in sorted(self.parameters.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ToolSpec:
        return cls(d["name"], d.get("description", ""), dict(d.get("parameters", {})))


@dataclass(frozen=True, eq=False)
class ToolCall:
    """One tool invocation. Arguments are stored in canonical form."""

    tool: str
    arguments: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "arguments", canonicalize_arguments(self.arguments))
        object.__setattr__(self, "_key", canonical_json([self.tool, self.arguments]))

    @property
    def key(self) -> str:
        return self._key

    def __eq__(self, other):
        if not isinstance(other, ToolCall):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other: ToolCall) -> bool:
        return self._key < other._key

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.arguments.items())
        return f"{self.tool}({args})"

    def to_dict(self) -> dict:
        return {"name": self.tool, "arguments": self.arguments}

    @classmethod
    def from_dict(cls, d: Mapping) -> ToolCall:
        return cls(d["name"], d.get("arguments", {}))


@dataclass(frozen=True, eq=False)
class StepGroup:
    """A set of calls issued together in one turn (a multiset, order-free)."""

    calls: tuple[ToolCall, ...]

    def __post_init__(self):
        calls = tuple(sorted(self.calls))
        if not calls:
            raise ValueError("a step group needs at least one call")
        object.__setattr__(self, "calls", calls)
        object.__setattr__(self, "_key", tuple(c.key for c in calls))

    @property
    def key(self) -> tuple[str, ...]:
        return self._key

    def __eq__(self, other):
        if not isinstance(other, StepGroup):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __len__(self):
        return len(self.calls)

    def __iter__(self):
        return iter(self.calls)

    def __repr__(self):
        return "{" + ", ".join(map(repr, self.calls)) + "}"

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.calls]


@dataclass(frozen=True)
class Observation:
    status_code: int
    response: Any

    def to_dict(self) -> dict:
        return {"status_code": self.status_code, "response": self.response}

    @classmethod
    def from_dict(cls, d: Mapping) -> Observation:
        return cls(int(d["status_code"]), d.get("response"))


UNRECOGNIZED_CALL = Observation(400, {"error": "unrecognized call"})


# ---------------------------------------------------------------------------
# Tasks and cases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Task:
    user_text: str
    gold_policy: PolicyType
    hiding: HidingStrategy = HidingStrategy.NONE
    gold_graph: DependencyGraph | None = None
    gold_clarify_params: tuple[str, ...] = ()
    gold_summary: str = ""
    # ToolCall.key -> Observation
    scripted_observations: Mapping[str, Observation] = field(default_factory=dict)

    @property
    def gold_call_count(self) -> int:
        return len(self.gold_graph.nodes) if self.gold_graph is not None else 0


@dataclass(frozen=True)
class TestCase:
    id: str
    tools: tuple[ToolSpec, ...]
    tasks: tuple[Task, ...]
    env_info: str = ""

    __test__ = False  # not a pytest class

    def tool(self, name: str) -> ToolSpec | None:
        for spec in self.tools:
            if spec.name == name:
                return spec
        return None

    @property
    def policy_sequence(self) -> list[PolicyType]:
        return [t.gold_policy for t in self.tasks]


# ---------------------------------------------------------------------------
# Agent outputs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurnOutput:
    """Either a group of tool calls or a text reply; exactly one is set."""

    calls: StepGroup | None = None
    text: str | None = None

    def __post_init__(self):
        if (self.calls is None) == (self.text is None):
            raise ValueError("a turn output is either tool calls or text")

    @classmethod
    def tool_calls(cls, calls) -> TurnOutput:
        if not isinstance(calls, StepGroup):
            calls = StepGroup(tuple(calls))
        return cls(calls=calls)

    @classmethod
    def reply(cls, text: str) -> TurnOutput:
        return cls(text=text)

    @property
    def is_text(self) -> bool:
        return self.text is not None

    def to_dict(self) -> dict:
        if self.calls is not None:
            return {"tool_calls": self.calls.to_list()}
        return {"text": self.text}


def classify_output(output: TurnOutput) -> ResponseKind:
    return ResponseKind.TEXT_POLICY if output.is_text else ResponseKind.TOOL_POLICY


@dataclass(frozen=True)
class Trajectory:
    case_id: str
    task_index: int
    steps: tuple[TurnOutput, ...]
    terminated_by: TerminatedBy

    def __post_init__(self):
        for out in self.steps[:-1]:
            if out.is_text:
                raise ValueError("text may only appear as the final step")

    @property
    def tool_steps(self) -> list[StepGroup]:
        return [s.calls for s in self.steps if s.calls is not None]

    @property
    def final_text(self) -> str | None:
        if self.steps and self.steps[-1].is_text:
            return self.steps[-1].text
        return None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "task_index": self.task_index,
            "steps": [s.to_dict() for s in self.steps],
            "terminated_by": self.terminated_by.value,
        }
