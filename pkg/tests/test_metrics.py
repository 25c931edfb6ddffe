import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolpath.errors import EmptySequence, EmptyTab, KeySetMismatch, MissingLabel
from toolpath.matcher import ErrorClass, MatchResult
from toolpath.metrics import (
    CrossTab,
    ScoredTask,
    Tally,
    acc2,
    cross_tab,
    ddd,
    group_metrics,
    hiding_totals,
    partition,
    ptf,
    render_extended,
    summarize,
    vf,
)
from toolpath.model import COARSE_TYPES, HidingStrategy, PolicyType

S, M, C, Q = PolicyType.SINGLE, PolicyType.MULTI, PolicyType.CHAT, PolicyType.CLARIFY
TOL = 1e-12


def test_ptf_examples():
    assert ptf([S, S, S]) == 0
    assert ptf([S, M, S]) == 2
    assert ptf([S]) == 0
    # subtypes project onto Multi first
    assert ptf([PolicyType.MULTI_SERIAL, PolicyType.MULTI_PARALLEL]) == 0
    with pytest.raises(EmptySequence):
        ptf([])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ptf_range_over_all_combinations(n):
    seen = set()
    for combo in itertools.product(COARSE_TYPES, repeat=n):
        value = ptf(combo)
        assert 0 <= value <= n - 1
        seen.add(value)
    assert seen == set(range(n))


def test_crosstab_pins():
    t = CrossTab(5, 1, 1, 3)
    assert abs(vf(t) - 0.2) < TOL
    assert abs(acc2(t) - 0.5) < TOL
    assert abs(ddd(CrossTab(5, 2, 1, 2)) - 4.0) < TOL


@pytest.mark.parametrize("k", [2, 10])
def test_ddd_scale_invariance(k):
    for t in (CrossTab(5, 2, 1, 2), CrossTab(5, 1, 1, 3), CrossTab(3, 7, 2, 0)):
        assert abs(ddd(t.scaled(k)) - ddd(t)) < TOL
        assert abs(vf(t.scaled(k)) - vf(t)) < TOL


def test_ddd_sentinels():
    assert ddd(CrossTab(4, 2, 0, 1)) == math.inf
    assert ddd(CrossTab(0, 2, 1, 1)) is None
    assert ddd(CrossTab(5, 0, 0, 5)) is None
    assert ddd(CrossTab(0, 2, 0, 1)) is None
    assert ddd(CrossTab(3, 0, 2, 1)) == 0.0
    assert render_extended(None) == "n/a"
    assert render_extended(math.inf) == "inf"
    assert render_extended(0.5) == 0.5


def test_empty_tab():
    for fn in (acc2, vf, ddd):
        with pytest.raises(EmptyTab):
            fn(CrossTab())


cells = st.integers(0, 50)


@settings(max_examples=300, deadline=None)
@given(cells, cells, cells, cells)
def test_vf_identity(rr, rw, wr, ww):
    t = CrossTab(rr, rw, wr, ww)
    if t.total == 0:
        return
    acc3 = (rr + wr) / t.total
    acc2_ = (rr + rw) / t.total
    assert abs(vf(t) - (acc3 + acc2_ - 2 * acc2(t))) < 1e-9
    d = ddd(t)
    if d is not None and not math.isinf(d):
        assert abs(d - (rw / wr) / acc2(t)) < 1e-9


def test_cross_tab_pairing():
    c2 = {"a": True, "b": True, "c": False, "d": False}
    c3 = {"a": True, "b": False, "c": True, "d": False}
    assert cross_tab(c2, c3) == CrossTab(1, 1, 1, 1)
    with pytest.raises(KeySetMismatch):
        cross_tab(c2, {"a": True})


# ---------------------------------------------------------------------------
# Records and grouping
# ---------------------------------------------------------------------------


def record(case, index=0, correct=True, policy=S, ap=None, optimal=None, error=None, ptf_=0, count=2,
           hiding=HidingStrategy.NONE):
    ap = (1.0 if correct else 0.0) if ap is None else ap
    optimal = correct if optimal is None else optimal
    if not correct and error is None:
        error = ErrorClass.TOOL_ERROR
    return ScoredTask(case, index, policy, MatchResult(correct, ap, optimal, None, error), ptf_, count, hiding)


def test_scored_task_round_trip():
    r = record("x", 1, False, PolicyType.MULTI_MIXED, ap=0.5, hiding=HidingStrategy.OMIT)
    assert ScoredTask.from_dict(r.to_dict()) == r


def test_summary_ap_and_op_over_tool_tasks_only():
    records = [
        record("a", policy=PolicyType.MULTI_PARALLEL, ap=1.0, optimal=False),
        record("b", policy=PolicyType.MULTI_SERIAL, correct=False, ap=0.5),
        record("c", policy=C, correct=False, ap=0.0),
        record("d", policy=S),
    ]
    report = summarize(records)
    assert report.count == 4
    assert report.accuracy == 0.5
    assert abs(report.ap_mean - 2.5 / 3) < TOL
    assert abs(report.op_rate - 1 / 3) < TOL
    assert report.crosstab is None and report.vf is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.sampled_from([S, C, PolicyType.MULTI_MIXED])), max_size=12),
       st.data())
def test_tally_is_associative(items, data):
    records = [record(str(i), correct=ok, policy=p) for i, (ok, p) in enumerate(items)]
    cut1 = data.draw(st.integers(0, len(records)))
    cut2 = data.draw(st.integers(cut1, len(records)))
    a, b, c = records[:cut1], records[cut1:cut2], records[cut2:]
    whole = Tally.of(records)
    assert (Tally.of(a) + Tally.of(b)) + Tally.of(c) == whole
    assert Tally.of(a) + (Tally.of(b) + Tally.of(c)) == whole


def test_paired_summary():
    c2 = [record("a"), record("b"), record("c", correct=False), record("d", correct=False)]
    c3 = [record("a"), record("b", correct=False), record("c"), record("d", correct=False)]
    report = summarize(c3, c2)
    assert report.crosstab == CrossTab(1, 1, 1, 1)
    assert report.vf == 0.5
    with pytest.raises(KeySetMismatch):
        summarize(c3, c2[:2])


def test_group_by_keys():
    records = [
        record("a", ptf_=0, count=2, policy=PolicyType.MULTI_SERIAL),
        record("b", ptf_=1, count=3, policy=S, hiding=HidingStrategy.OMIT),
        record("c", ptf_=1, count=3, policy=PolicyType.MULTI_PARALLEL, correct=False),
    ]
    by_ptf = group_metrics(records, "ptf")
    assert list(by_ptf) == [0, 1]
    assert by_ptf[1].accuracy == 0.5
    assert list(group_metrics(records, "task_count")) == [2, 3]
    subtypes = group_metrics(records, "multi_subtype")
    assert set(subtypes) == {PolicyType.MULTI_SERIAL, PolicyType.MULTI_PARALLEL}
    assert set(partition(records, "hiding")) == {HidingStrategy.NONE, HidingStrategy.OMIT}
    with pytest.raises(ValueError):
        group_metrics(records, "colour")


def test_missing_label():
    bare = ScoredTask("a", 0, S, MatchResult(True, 1.0, True))
    with pytest.raises(MissingLabel):
        group_metrics([bare], "ptf")


def test_hiding_micro_and_macro():
    records = [
        record("o1", hiding=HidingStrategy.OMIT),
        record("o2", hiding=HidingStrategy.OMIT),
        record("o3", hiding=HidingStrategy.OMIT, correct=False),
        record("r1", hiding=HidingStrategy.REFERENCE, correct=False),
        record("n1", hiding=HidingStrategy.NONE),
    ]
    totals = hiding_totals(records)
    assert abs(totals["micro"] - 0.5) < TOL
    assert abs(totals["macro"] - (2 / 3) / 2) < TOL
    assert hiding_totals([record("n")]) == {"micro": None, "macro": None}
