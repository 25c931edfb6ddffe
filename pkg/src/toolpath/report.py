"""Leaderboard rows and their JSON / CSV / Markdown renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

from .errors import EmptyReport, KeySetMismatch
from .matcher import ErrorClass
from .metrics import (
    HIDDEN,
    ScoredTask,
    Tally,
    group_metrics,
    hiding_totals,
    render_extended,
    summarize,
)
from .model import MULTI_SUBTYPES, PolicyType

SUBTYPE_COLUMNS = (
    (PolicyType.MULTI_PARALLEL, "P_multi^P"),
    (PolicyType.MULTI_SERIAL, "P_multi^S"),
    (PolicyType.MULTI_MIXED, "P_multi^S+P"),
)
HIDING_COLUMNS = ((HIDDEN[0], "Omit"), (HIDDEN[1], "Ref"), (HIDDEN[2], "Long"))
TASK_COUNTS = (1, 2, 3, 4)
PTF_VALUES = (0, 1, 2, 3)


@dataclass
class LeaderboardRow:
    label: str
    # overall accuracy follows the injected-history (c3) protocol
    accuracy: float | None = None
    c1_total: float | None = None
    ap_mean: float | None = None
    op_rate: float | None = None
    subtype_accuracy: dict[str, float | None] = field(default_factory=dict)
    hiding_accuracy: dict[str, float | None] = field(default_factory=dict)
    hiding_total: dict[str, float | None] = field(default_factory=dict)
    task_count_accuracy: dict[int, float | None] = field(default_factory=dict)
    acc2: float | None = None
    vf: float | None = None
    ddd: float | None = None
    paired: bool = False
    ddd_by_ptf: dict[int, float | None] = field(default_factory=dict)
    errors: dict[str, int] = field(default_factory=dict)

    @property
    def error_share(self) -> dict[str, float | None]:
        total = sum(self.errors.values())
        return {k: (v / total if total else None) for k, v in self.errors.items()}

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "accuracy": self.accuracy,
            "c1_total": self.c1_total,
            "ap_mean": self.ap_mean,
            "op_rate": self.op_rate,
            "subtype_accuracy": dict(self.subtype_accuracy),
            "hiding_accuracy": dict(self.hiding_accuracy),
            "hiding_total": dict(self.hiding_total),
            "task_count_accuracy": {str(k): v for k, v in self.task_count_accuracy.items()},
            "acc2": self.acc2,
            "vf": self.vf,
            "ddd": render_extended(self.ddd) if self.paired else None,
            "ddd_by_ptf": {str(k): render_extended(v) for k, v in self.ddd_by_ptf.items()},
            "errors": dict(self.errors),
            "error_share": self.error_share,
        }


def build_row(
    c1: Sequence[ScoredTask] | None,
    c2: Sequence[ScoredTask] | None,
    c3: Sequence[ScoredTask] | None,
    label: str,
) -> LeaderboardRow:
    """Assemble one agent's row from the three challenge runs (any may be missing)."""
    row = LeaderboardRow(label)
    if c3:
        row.accuracy = summarize(c3).accuracy
    if c1:
        multi = [r for r in c1 if r.gold_policy in MULTI_SUBTYPES]
        if multi:
            report = summarize(multi)
            row.c1_total, row.ap_mean, row.op_rate = report.accuracy, report.ap_mean, report.op_rate
            groups = group_metrics(multi, "multi_subtype")
            row.subtype_accuracy = {
                p.value: groups[p].accuracy if p in groups else None for p, _ in SUBTYPE_COLUMNS
            }
    if c2:
        groups = group_metrics(c2, "hiding")
        row.hiding_accuracy = {h.value: groups[h].accuracy if h in groups else None for h in HIDDEN}
        row.hiding_total = hiding_totals(c2)
        by_len = group_metrics(c2, "task_count")
        row.task_count_accuracy = {n: by_len[n].accuracy for n in by_len}
    if c2 and c3:
        if {r.key for r in c2} != {r.key for r in c3}:
            raise KeySetMismatch("c2 and c3 results cover different tasks")
        paired = summarize(c3, c2)
        row.paired = True
        row.acc2, row.vf, row.ddd = paired.acc2, paired.vf, paired.ddd
        row.ddd_by_ptf = {g: rep.ddd for g, rep in group_metrics(c3, "ptf", c2).items()}
    pooled = Tally.of([*(c1 or ()), *(c2 or ()), *(c3 or ())])
    row.errors = {e.value: pooled.error_counts[e.value] for e in ErrorClass}
    return row


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _pct(x: float | None) -> str:
    return "" if x is None else f"{100 * x:.2f}"


def _num(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def _ext(x: float | None, present: bool) -> str:
    if not present:
        return ""
    if x is None:
        return "n/a"
    if math.isinf(x):
        return "inf"
    return f"{x:.2f}"


def _columns(row: LeaderboardRow) -> list[tuple[str, str]]:
    cols = [
        ("agent", row.label),
        ("accuracy", _pct(row.accuracy)),
        ("c1_total", _pct(row.c1_total)),
    ]
    cols += [(p.value, _pct(row.subtype_accuracy.get(p.value))) for p, _ in SUBTYPE_COLUMNS]
    cols += [("ap", _pct(row.ap_mean)), ("op_rate", _pct(row.op_rate))]
    cols += [(h.value, _pct(row.hiding_accuracy.get(h.value))) for h in HIDDEN]
    cols += [
        ("hiding_micro", _pct(row.hiding_total.get("micro"))),
        ("hiding_macro", _pct(row.hiding_total.get("macro"))),
    ]
    cols += [(f"tasks_{n}", _pct(row.task_count_accuracy.get(n))) for n in TASK_COUNTS]
    cols += [
        ("acc2", _pct(row.acc2)),
        ("vf", _num(row.vf)),
        ("ddd", _ext(row.ddd, row.paired)),
    ]
    cols += [
        (f"ddd_ptf_{k}", _ext(row.ddd_by_ptf.get(k), k in row.ddd_by_ptf)) for k in PTF_VALUES
    ]
    share = row.error_share
    cols += [(f"err_{e.value}", _pct(share.get(e.value))) for e in ErrorClass]
    return cols


def to_csv(rows: Sequence[LeaderboardRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name for name, _ in _columns(rows[0])])
    for row in rows:
        writer.writerow([value for _, value in _columns(row)])
    return buf.getvalue()


def _md_table(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    def cell(v: str) -> str:
        return (v or "-").replace("|", "\\|")

    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(cell(v) for v in r) + " |" for r in body]
    return "\n".join(lines)


def to_markdown(rows: Sequence[LeaderboardRow]) -> str:
    multi = _md_table(
        ["Model", "Total", *(name for _, name in SUBTYPE_COLUMNS), "AP", "OP Rate"],
        [
            [r.label, _pct(r.c1_total),
             *(_pct(r.subtype_accuracy.get(p.value)) for p, _ in SUBTYPE_COLUMNS),
             _pct(r.ap_mean), _pct(r.op_rate)]
            for r in rows
        ],
    )
    hiding = _md_table(
        ["Model", "Total", *(name for _, name in HIDING_COLUMNS)],
        [
            [r.label, _pct(r.hiding_total.get("micro")),
             *(_pct(r.hiding_accuracy.get(h.value)) for h, _ in HIDING_COLUMNS)]
            for r in rows
        ],
    )
    robustness = _md_table(
        ["Model", "Accuracy", "Acc2", "VF", "DDD", *(f"DDD@PTF={k}" for k in PTF_VALUES)],
        [
            [r.label, _pct(r.accuracy), _pct(r.acc2), _num(r.vf), _ext(r.ddd, r.paired),
             *(_ext(r.ddd_by_ptf.get(k), k in r.ddd_by_ptf) for k in PTF_VALUES)]
            for r in rows
        ],
    )
    length = _md_table(
        ["Model", *(f"{n} task{'s' if n > 1 else ''}" for n in TASK_COUNTS)],
        [[r.label, *(_pct(r.task_count_accuracy.get(n)) for n in TASK_COUNTS)] for r in rows],
    )
    errors = _md_table(
        ["Model", *(e.value for e in ErrorClass)],
        [[r.label, *(_pct(r.error_share.get(e.value)) for e in ErrorClass)] for r in rows],
    )
    sections = [
        ("Multi-tool tasks", multi),
        ("Hidden information", hiding),
        ("Robustness", robustness),
        ("Task length", length),
        ("Error distribution (%)", errors),
    ]
    return "\n\n".join(f"### {title}\n\n{table}" for title, table in sections) + "\n"


def emit(rows: Sequence[LeaderboardRow], fmt: str = "json") -> str:
    if not rows:
        raise EmptyReport("no rows to emit")
    if fmt == "json":
        return json.dumps([r.to_dict() for r in rows], indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        return to_csv(rows)
    if fmt in ("markdown", "md"):
        return to_markdown(rows)
    raise ValueError(f"unknown report format {fmt!r}")
