"""Policy-transition frequency, C2/C3 cross-tab metrics and grouped summaries.

``ddd`` returns an extended number: a float, ``math.inf`` when the agent only
ever flips right-to-wrong, or ``None`` when the ratio is undefined.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .errors import EmptySequence, EmptyTab, KeySetMismatch, MissingLabel
from .matcher import ErrorClass, MatchResult
from .model import MULTI_SUBTYPES, HidingStrategy, PolicyType, coarse

GROUP_KEYS = ("ptf", "task_count", "hiding", "multi_subtype")
HIDDEN = (HidingStrategy.OMIT, HidingStrategy.REFERENCE, HidingStrategy.LONG_CONTEXT)


def ptf(seq: Sequence[PolicyType | str]) -> int:
    """Number of adjacent policy-type switches, on coarse types."""
    if not seq:
        raise EmptySequence("policy sequence is empty")
    types = [coarse(p) for p in seq]
    return sum(a != b for a, b in zip(types, types[1:]))


@dataclass(frozen=True)
class CrossTab:
    rr: int = 0
    rw: int = 0
    wr: int = 0
    ww: int = 0

    @property
    def total(self) -> int:
        return self.rr + self.rw + self.wr + self.ww

    def scaled(self, k: int) -> CrossTab:
        return CrossTab(self.rr * k, self.rw * k, self.wr * k, self.ww * k)

    def __add__(self, other: CrossTab) -> CrossTab:
        return CrossTab(self.rr + other.rr, self.rw + other.rw, self.wr + other.wr, self.ww + other.ww)

    def to_dict(self) -> dict:
        return {"rr": self.rr, "rw": self.rw, "wr": self.wr, "ww": self.ww}


def cross_tab(c2: Mapping, c3: Mapping) -> CrossTab:
    """Pair per-case correctness under the redacted (c2) and injected (c3) histories."""
    if set(c2) != set(c3):
        missing = sorted(map(str, set(c2) ^ set(c3)))[:5]
        raise KeySetMismatch(f"case ids differ between result sets, e.g. {missing}")
    rr = rw = wr = ww = 0
    for key, right2 in c2.items():
        right3 = c3[key]
        if right2 and right3:
            rr += 1
        elif right2:
            rw += 1
        elif right3:
            wr += 1
        else:
            ww += 1
    return CrossTab(rr, rw, wr, ww)


def _check(t: CrossTab) -> None:
    if t.total <= 0:
        raise EmptyTab("cross-tab has no paired results")


def acc2(t: CrossTab) -> float:
    _check(t)
    return t.rr / t.total


def vf(t: CrossTab) -> float:
    _check(t)
    return (t.wr + t.rw) / t.total


def ddd(t: CrossTab) -> float | None:
    _check(t)
    if t.wr == 0 and t.rw == 0:
        return None
    if t.rr == 0:
        return None
    if t.wr == 0:
        return math.inf
    # rw/wr * 1/acc2, rearranged to keep integer arithmetic until the last division
    return (t.rw * t.total) / (t.wr * t.rr)


def render_extended(x: float | None) -> float | str:
    if x is None:
        return "n/a"
    if math.isinf(x):
        return "inf"
    return x


# ---------------------------------------------------------------------------
# Per-task records and aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoredTask:
    """One scored task with the labels used for grouping."""

    case_id: str
    task_index: int
    gold_policy: PolicyType
    result: MatchResult
    ptf: int | None = None
    task_count: int | None = None
    hiding: HidingStrategy | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.case_id, self.task_index)

    @property
    def correct(self) -> bool:
        return self.result.correct

    def label(self, name: str):
        if name == "multi_subtype":
            return self.gold_policy
        value = getattr(self, name)
        if value is None:
            raise MissingLabel(f"{self.case_id}#{self.task_index} has no {name} label")
        return value

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "task_index": self.task_index,
            "gold_policy": self.gold_policy.value,
            "ptf": self.ptf,
            "task_count": self.task_count,
            "hiding": self.hiding.value if self.hiding else None,
            **self.result.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ScoredTask:
        return cls(
            d["case_id"],
            int(d["task_index"]),
            PolicyType(d["gold_policy"]),
            MatchResult.from_dict(d),
            d.get("ptf"),
            d.get("task_count"),
            HidingStrategy(d["hiding"]) if d.get("hiding") else None,
        )


@dataclass(frozen=True)
class Tally:
    """Additive counters; summaries over shards merge by ``+``."""

    count: int = 0
    correct: int = 0
    tool_count: int = 0
    ap_sum: float = 0.0
    optimal: int = 0
    errors: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, records: Iterable[ScoredTask]) -> Tally:
        total = cls()
        for r in records:
            total = total + cls._one(r)
        return total

    @classmethod
    def _one(cls, r: ScoredTask) -> Tally:
        tool = r.gold_policy.is_tool_policy
        errors = ((r.result.error.value, 1),) if r.result.error else ()
        return cls(
            1,
            int(r.correct),
            int(tool),
            r.result.ap if tool else 0.0,
            int(tool and r.result.optimal),
            errors,
        )

    def __add__(self, other: Tally) -> Tally:
        merged: dict[str, int] = dict(self.errors)
        for name, n in other.errors:
            merged[name] = merged.get(name, 0) + n
        return Tally(
            self.count + other.count,
            self.correct + other.correct,
            self.tool_count + other.tool_count,
            self.ap_sum + other.ap_sum,
            self.optimal + other.optimal,
            tuple(sorted(merged.items())),
        )

    @property
    def error_counts(self) -> dict[str, int]:
        counts = {e.value: 0 for e in ErrorClass}
        counts.update(dict(self.errors))
        return counts


@dataclass
class MetricReport:
    count: int
    accuracy: float | None
    ap_mean: float | None
    op_rate: float | None
    crosstab: CrossTab | None = None
    grouped: dict[str, dict] = field(default_factory=dict)

    @property
    def acc2(self) -> float | None:
        return acc2(self.crosstab) if self.crosstab and self.crosstab.total else None

    @property
    def vf(self) -> float | None:
        return vf(self.crosstab) if self.crosstab and self.crosstab.total else None

    @property
    def ddd(self) -> float | None:
        return ddd(self.crosstab) if self.crosstab and self.crosstab.total else None

    @classmethod
    def from_tally(cls, t: Tally, crosstab: CrossTab | None = None) -> MetricReport:
        return cls(
            t.count,
            t.correct / t.count if t.count else None,
            t.ap_sum / t.tool_count if t.tool_count else None,
            t.optimal / t.tool_count if t.tool_count else None,
            crosstab,
        )

    def to_dict(self) -> dict:
        doc = {
            "count": self.count,
            "accuracy": self.accuracy,
            "ap_mean": self.ap_mean,
            "op_rate": self.op_rate,
            "acc2": self.acc2,
            "vf": self.vf,
            "ddd": render_extended(self.ddd) if self.crosstab else None,
            "crosstab": self.crosstab.to_dict() if self.crosstab else None,
        }
        if self.grouped:
            doc["grouped"] = {
                key: {str(g): r.to_dict() for g, r in groups.items()}
                for key, groups in self.grouped.items()
            }
        return doc


def pair(records: Sequence[ScoredTask], paired: Sequence[ScoredTask]) -> CrossTab:
    """Cross-tab of ``paired`` (C2) against ``records`` (C3) over the records' keys."""
    c2_all = {r.key: r.correct for r in paired}
    c3 = {r.key: r.correct for r in records}
    missing = [k for k in c3 if k not in c2_all]
    if missing:
        raise KeySetMismatch(f"no paired result for {missing[0]}")
    return cross_tab({k: c2_all[k] for k in c3}, c3)


def summarize(records: Sequence[ScoredTask], paired: Sequence[ScoredTask] | None = None) -> MetricReport:
    crosstab = pair(records, paired) if paired is not None else None
    return MetricReport.from_tally(Tally.of(records), crosstab)


def _group_value(record: ScoredTask, key: str):
    if key not in GROUP_KEYS:
        raise ValueError(f"unknown grouping key {key!r}; expected one of {GROUP_KEYS}")
    value = record.label(key)
    if key == "multi_subtype" and value not in MULTI_SUBTYPES:
        return None
    return value


def _sort_key(g):
    return (0, g) if isinstance(g, int) else (1, str(getattr(g, "value", g)))


def partition(records: Iterable[ScoredTask], key: str) -> dict:
    groups: dict = {}
    for r in records:
        g = _group_value(r, key)
        if g is not None:
            groups.setdefault(g, []).append(r)
    return {g: groups[g] for g in sorted(groups, key=_sort_key)}


def group_metrics(
    records: Sequence[ScoredTask], key: str, paired: Sequence[ScoredTask] | None = None
) -> dict:
    """Partition by a label and summarize each non-empty subset.

    ``multi_subtype`` only forms groups for the three multi-call subtypes.
    """
    return {g: summarize(rs, paired) for g, rs in partition(records, key).items()}


def hiding_totals(records: Sequence[ScoredTask]) -> dict[str, float | None]:
    """Accuracy over hidden-information tasks, weighted by count (micro) and per strategy (macro)."""
    groups = {g: rs for g, rs in partition(records, "hiding").items() if g in HIDDEN}
    pooled = [r for rs in groups.values() for r in rs]
    micro = sum(r.correct for r in pooled) / len(pooled) if pooled else None
    accs = [sum(r.correct for r in rs) / len(rs) for rs in groups.values()]
    macro = sum(accs) / len(accs) if accs else None
    return {"micro": micro, "macro": macro}
