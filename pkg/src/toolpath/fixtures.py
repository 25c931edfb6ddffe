"""Deterministic skeleton corpora and scripted mock agents.

Generated cases are structural stand-ins for curated benchmark data: template
text over a small synthetic tool library. Every city name and every value a
tool returns is a unique generated token, so leaks of hidden or redacted
information can be checked with plain substring search.
"""

from __future__ import annotations

import itertools
import json
import random
import sys
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidLength, InvalidPlan
from .graph import build_graph
from .harness import Role, gold_steps
from .model import (
    COARSE_TYPES,
    HidingStrategy,
    Observation,
    PolicyType,
    Task,
    TestCase,
    ToolCall,
    ToolSpec,
)

OBS_PREFIX = "obs-"
ENV_INFO = "Current time: 2024-07-12 09:00 (Friday)"

_SUBTYPE_ORDER = (PolicyType.MULTI_SERIAL, PolicyType.MULTI_PARALLEL, PolicyType.MULTI_MIXED)
_CODES = {
    PolicyType.SINGLE: "S",
    PolicyType.MULTI: "M",
    PolicyType.CHAT: "H",
    PolicyType.CLARIFY: "Q",
}


def _param(kind: str = "string", required: bool = True, **extra) -> dict:
    return {"type": kind, "required": required, **extra}


TOOL_LIBRARY = (
    ToolSpec("getCityForecast", "Weather forecast for a city on a date.",
             {"city": _param(), "date": _param(), "unit": _param(required=False, enum=["C", "F"])}),
    ToolSpec("getTrafficStatus", "Current road traffic conditions in a city.", {"city": _param()}),
    ToolSpec("searchStation", "Find the main train station of a city.", {"city": _param()}),
    ToolSpec("getStationAccess", "Wheelchair access details for a station.", {"station_id": _param()}),
    ToolSpec("createPresentation", "Create an empty slide deck.", {"title": _param()}),
    ToolSpec("getMovieRank", "Most popular movie currently showing in a city.", {"city": _param()}),
    ToolSpec("getMovieDetails", "Details of a movie by id.", {"movie_id": _param()}),
    ToolSpec("addSlide", "Append a slide to a deck.",
             {"presentation_id": _param(), "content": _param()}),
    ToolSpec("bookRestaurant", "Reserve a restaurant table.",
             {"city": _param(), "time": _param(), "people": _param("integer")}),
)


# ---------------------------------------------------------------------------
# Policy combinations
# ---------------------------------------------------------------------------


def enumerate_policy_combinations(n: int) -> list[tuple[PolicyType, ...]]:
    """All ``4**n`` ordered sequences of coarse policy types."""
    if not 1 <= n <= 4:
        raise InvalidLength(f"combination length must be 1-4, got {n}")
    return list(itertools.product(COARSE_TYPES, repeat=n))


def combo_code(combo: Sequence[PolicyType]) -> str:
    return "".join(_CODES[PolicyType(p).coarse] for p in combo)


# ---------------------------------------------------------------------------
# Case generation
# ---------------------------------------------------------------------------

_SYLLABLES = ("ka", "ve", "lo", "mir", "dan", "sel", "tor", "ny", "qua", "bri", "zo", "hel", "ru", "fen", "ost", "ya")


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set()

    def token(self) -> str:
        while True:
            tok = OBS_PREFIX + "%08x" % self.rng.getrandbits(32)
            if tok not in self.used:
                self.used.add(tok)
                return tok

    def city(self) -> str:
        while True:
            name = "".join(self.rng.choice(_SYLLABLES) for _ in range(3)).capitalize() + "ville"
            if name not in self.used:
                self.used.add(name)
                return name


def _phrase(hiding: HidingStrategy, city: str, explicit: str, omit: str, ref: str, far: str) -> str:
    if hiding is HidingStrategy.NONE:
        return explicit.format(city=city)
    if hiding is HidingStrategy.OMIT:
        return omit
    if hiding is HidingStrategy.REFERENCE:
        return ref
    return far


def _tool_task(policy: PolicyType, city: str, hiding: HidingStrategy, index: int, b: _Builder) -> Task:
    date = f"2024-07-{13 + index:02d}"
    observations: dict[str, Observation] = {}

    def call(tool: str, response: dict, **arguments) -> ToolCall:
        c = ToolCall(tool, arguments)
        observations[c.key] = Observation(200, {**response, "token": b.token()})
        return c

    if policy is PolicyType.SINGLE:
        nodes = [call("getCityForecast", {"weather": "Light rain", "high": "25C", "low": "18C"},
                      city=city, date=date)]
        edges: list[tuple[int, int]] = []
        text = _phrase(hiding, city,
                       f"Please check the weather in {{city}} on {date}.",
                       f"And the weather on {date}?",
                       f"What will the weather be like in that city on {date}?",
                       f"Back to the first city we discussed: what is the weather on {date}?")
        summary = f"The forecast for {city} on {date} is light rain."
    elif policy is PolicyType.MULTI_PARALLEL:
        nodes = [
            call("getCityForecast", {"weather": "Sunny", "high": "29C", "low": "20C"}, city=city, date=date),
            call("getTrafficStatus", {"level": "moderate"}, city=city),
        ]
        edges = []
        text = _phrase(hiding, city,
                       f"Tell me the weather on {date} and the current traffic in {{city}}.",
                       f"Also the weather on {date} and the traffic right now?",
                       f"For that city, give me the weather on {date} and the current traffic.",
                       f"For the first city I mentioned, give me the weather on {date} and the traffic.")
        summary = f"In {city} it will be sunny on {date}; traffic is moderate."
    elif policy is PolicyType.MULTI_SERIAL:
        station = b.token()
        first = ToolCall("searchStation", {"city": city})
        observations[first.key] = Observation(200, {"station_id": station, "token": b.token()})
        nodes = [first, call("getStationAccess", {"wheelchair": True}, station_id=station)]
        edges = [(0, 1)]
        text = _phrase(hiding, city,
                       "Find the main station in {city} and tell me about its wheelchair access.",
                       "Is the main station wheelchair accessible?",
                       "Does the main station of that city have wheelchair access?",
                       "Going back to the first city: is its main station wheelchair accessible?")
        summary = f"The main station in {city} is wheelchair accessible."
    elif policy is PolicyType.MULTI_MIXED:
        deck, movie = b.token(), b.token()
        title = f"Weekend Picks {index + 1}"
        create = ToolCall("createPresentation", {"title": title})
        observations[create.key] = Observation(200, {"presentation_id": deck, "token": b.token()})
        rank = ToolCall("getMovieRank", {"city": city})
        observations[rank.key] = Observation(200, {"movie_id": movie, "token": b.token()})
        details_title = b.token()
        details = ToolCall("getMovieDetails", {"movie_id": movie})
        observations[details.key] = Observation(200, {"movie_title": details_title, "token": b.token()})
        slide = call("addSlide", {"slides": 1}, presentation_id=deck, content=details_title)
        nodes = [create, rank, details, slide]
        edges = [(1, 2), (0, 3), (2, 3)]
        text = _phrase(hiding, city,
                       f"Create a deck titled '{title}' with a slide on the top movie in {{city}}.",
                       f"Now create a deck titled '{title}' with a slide on the top movie.",
                       f"Create a deck titled '{title}' with a slide on that city's top movie.",
                       f"For the first city, create a deck titled '{title}' with a slide on its top movie.")
        summary = f"I created the deck '{title}' with a slide on the top movie in {city}."
    else:  # pragma: no cover - guarded by caller
        raise InvalidPlan(f"{policy} is not a tool policy")
    graph = build_graph(nodes, edges)
    return Task(text, policy, hiding, graph, (), summary, observations)


def _text_task(policy: PolicyType, city: str, hiding: HidingStrategy) -> Task:
    if policy is PolicyType.CHAT:
        text = _phrase(hiding, city,
                       "Any packing tips for a weekend in {city}?",
                       "Any packing tips for the weekend?",
                       "Any packing tips for a weekend in that city?",
                       "Any packing tips for the first city I asked about?")
        return Task(text, policy, hiding, None, (), "Pack light layers and comfortable shoes.")
    text = _phrase(hiding, city,
                   "Please book a restaurant table in {city} for 4 people.",
                   "Please book a restaurant table for 4 people.",
                   "Please book a restaurant table in that city for 4 people.",
                   "Please book a restaurant table in the first city for 4 people.")
    return Task(text, policy, hiding, None, ("time",), "What time would you like the booking for?")


def generate_case(
    combo: Sequence[PolicyType | str],
    hiding_plan: Sequence[HidingStrategy | str],
    seed: int,
    case_id: str | None = None,
) -> TestCase:
    """Build a case realizing ``combo``; coarse ``Multi`` entries get a seeded subtype."""
    combo = [PolicyType(p) for p in combo]
    plan = [HidingStrategy(h) for h in hiding_plan]
    if not 1 <= len(combo) <= 4:
        raise InvalidPlan(f"need 1-4 tasks, got {len(combo)}")
    if len(plan) != len(combo):
        raise InvalidPlan("hiding plan and combination differ in length")
    if plan[0] is not HidingStrategy.NONE:
        raise InvalidPlan("the first task cannot hide information")
    if case_id is None:
        case_id = f"t{len(combo)}-{combo_code(combo)}-s{seed}"
    rng = random.Random(f"{seed}|{case_id}|{[p.value for p in combo]}|{[h.value for h in plan]}")
    b = _Builder(rng)

    cities: list[str] = []
    tasks = []
    for i, (policy, hiding) in enumerate(zip(combo, plan)):
        if hiding is HidingStrategy.NONE:
            city = b.city()
        elif hiding is HidingStrategy.LONG_CONTEXT:
            city = cities[0]
        else:
            city = cities[-1]
        cities.append(city)
        if policy is PolicyType.MULTI:
            policy = rng.choice(_SUBTYPE_ORDER)
        if policy.is_tool_policy:
            tasks.append(_tool_task(policy, city, hiding, i, b))
        else:
            tasks.append(_text_task(policy, city, hiding))
    return TestCase(case_id, TOOL_LIBRARY, tuple(tasks), ENV_INFO)


def hiding_plan_for(n: int, rng: random.Random) -> list[HidingStrategy]:
    plan = [HidingStrategy.NONE]
    for i in range(1, n):
        options = [HidingStrategy.OMIT, HidingStrategy.REFERENCE]
        if i >= 2:
            options.append(HidingStrategy.LONG_CONTEXT)
        plan.append(rng.choice(options))
    return plan


def generate_corpus(
    task_counts: Iterable[int] = (2, 3, 4),
    per_combo: int = 1,
    seed: int = 0,
    multi_subtype: PolicyType | None = None,
) -> list[TestCase]:
    """One or more cases for every policy combination of each requested length."""
    rng = random.Random(f"corpus|{seed}")
    cases = []
    for n in task_counts:
        for combo in enumerate_policy_combinations(n):
            for k in range(per_combo):
                realized = [multi_subtype if (p is PolicyType.MULTI and multi_subtype) else p for p in combo]
                plan = hiding_plan_for(n, rng)
                case_id = f"t{n}-{combo_code(combo)}-{k:02d}"
                cases.append(generate_case(realized, plan, seed, case_id))
    return cases


def full_shape_corpus(seed: int = 0) -> list[TestCase]:
    """256 single-task and 768 multi-task cases (256 per task length)."""
    return (
        generate_corpus([1], 64, seed)
        + generate_corpus([2], 16, seed)
        + generate_corpus([3], 4, seed)
        + generate_corpus([4], 1, seed)
    )


def observation_tokens(case: TestCase) -> set[str]:
    """Every generated token appearing in the case's scripted observations."""
    found = set()

    def walk(value):
        if isinstance(value, str) and value.startswith(OBS_PREFIX):
            found.add(value)
        elif isinstance(value, Mapping):
            for v in value.values():
                walk(v)
        elif isinstance(value, list):
            for v in value:
                walk(v)

    for task in case.tasks:
        for obs in task.scripted_observations.values():
            walk(obs.response)
    return found


# ---------------------------------------------------------------------------
# Mock agents
# ---------------------------------------------------------------------------


class MockAgentKind(str, Enum):
    PERFECT = "perfect"
    SERIALIZE_PARALLEL = "serialize-parallel"
    WRONG_TOOL = "wrong-tool"
    DROP_HIDDEN_INFO = "drop-hidden-info"


ASK_TO_REPEAT = "Sorry, which city do you mean? Could you repeat what you said before?"


@dataclass
class MockAgent:
    """Scripted agent that answers connector requests from the gold annotations.

    The agent is stateless across requests: it locates its position in the
    current task from the tool-call messages after the last user message.
    """

    kind: MockAgentKind
    cases: Mapping[str, TestCase]
    seed: int = 0

    def __post_init__(self):
        self.kind = MockAgentKind(self.kind)
        if not isinstance(self.cases, Mapping):
            self.cases = {c.id: c for c in self.cases}

    def __call__(self, request: Mapping) -> dict:
        case = self.cases[request["case_id"]]
        index = int(request["task_index"])
        task = case.tasks[index]
        messages = request["messages"]
        last_user = max(i for i, m in enumerate(messages) if m["role"] == Role.USER.value)
        done = sum(
            1 for m in messages[last_user + 1:]
            if m["role"] == Role.ASSISTANT.value and isinstance(m["content"], dict)
        )
        rng = random.Random(f"{self.seed}|{case.id}|{index}")

        if self.kind is MockAgentKind.DROP_HIDDEN_INFO and task.hiding is not HidingStrategy.NONE:
            return {"text": ASK_TO_REPEAT}
        if self.kind is MockAgentKind.WRONG_TOOL and not task.gold_policy.is_tool_policy:
            if done == 0:
                tool = rng.choice(case.tools)
                return {"tool_calls": [{"name": tool.name, "arguments": {}}]}
            return {"text": task.gold_summary}

        steps = self.script(case, index, rng)
        if done < len(steps):
            return {"tool_calls": steps[done]}
        return {"text": task.gold_summary}

    def script(self, case: TestCase, index: int, rng: random.Random) -> list[list[dict]]:
        task = case.tasks[index]
        steps = [g.to_list() for g in gold_steps(task)]
        if self.kind is MockAgentKind.SERIALIZE_PARALLEL:
            steps = [[call] for step in steps for call in step]
        elif self.kind is MockAgentKind.WRONG_TOOL and steps:
            s = rng.randrange(len(steps))
            c = rng.randrange(len(steps[s]))
            gold_tools = {call.tool for call in task.gold_graph.nodes}
            spare = [t.name for t in case.tools if t.name not in gold_tools]
            wrong = rng.choice(spare) if spare else steps[s][c]["name"] + "Legacy"
            steps[s] = [dict(call) for call in steps[s]]
            steps[s][c]["name"] = wrong
        return steps


def serve_jsonl(agent: MockAgent, stdin=None, stdout=None) -> None:
    """Answer one request per input line until end of input."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            reply = agent(json.loads(line))
        except (json.JSONDecodeError, KeyError, IndexError, ValueError) as exc:
            reply = {"error": f"bad request: {exc}"}
        stdout.write(json.dumps(reply, ensure_ascii=False) + "\n")
        stdout.flush()
