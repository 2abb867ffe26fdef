import json

import pytest

from slicescope.analyze import ErrorSliceEntry, ErrorSliceReport
from slicescope.repair import prioritize_groups, prioritize_pool
from slicescope.schema import DatasetError, Sample, TaggedDataset

from conftest import make_schema


def report_of(entries):
    return ErrorSliceReport(
        model_id="m",
        threshold_gap=0.2,
        overall_perf=0.9,
        error_slices=[
            ErrorSliceEntry(key=tuple(sorted(k)), count=c, avg_perf=a, parents=())
            for k, c, a in entries
        ],
    )


SCHEMA = make_schema({"a": ["x", "y"], "b": ["p", "q"]})


def pool_of(rows, ids=None, groups=None):
    samples = []
    for i, tags in enumerate(rows):
        samples.append(
            Sample(
                id=ids[i] if ids else f"s{i}",
                tags=tags,
                group=None if groups is None else groups[i],
            )
        )
    return TaggedDataset(SCHEMA, samples)


def test_budget_two_takes_worst_slice_matches():
    rows = [
        {"a": "y", "b": "q"},  # s0: no match
        {"a": "y", "b": "q"},  # s1
        {"a": "x", "b": "p"},  # s3 (renamed below)
        {"a": "x", "b": "p"},  # s7
        {"a": "x", "b": "p"},  # s9
    ]
    pool = pool_of(rows, ids=["s0", "s1", "s3", "s7", "s9"])
    report = report_of([((("a", "x"), ("b", "p")), 10, 0.1)])
    plan = prioritize_pool(report, pool, budget=2)
    assert plan.ids() == ["s3", "s7"]
    assert all(sel.slice_key == (("a", "x"), ("b", "p")) for sel in plan.selections)


def test_empty_worst_slice_falls_through():
    rows = [{"a": "y", "b": "p"}, {"a": "y", "b": "q"}]
    pool = pool_of(rows)
    report = report_of([
        ((("a", "x"),), 10, 0.1),   # matches nothing in the pool
        ((("b", "p"),), 8, 0.2),
    ])
    plan = prioritize_pool(report, pool, budget=1)
    assert plan.ids() == ["s0"]
    assert plan.selections[0].slice_key == (("b", "p"),)


def test_planted_pool_set_equality(rng):
    # 30% of the pool matches the two worst slices; with budget equal to
    # that fraction the plan is exactly the planted match set.
    spec = {f"a{i}": [f"t{j}" for j in range(3)] for i in range(4)}
    schema = make_schema(spec)
    combo1 = (("a0", "t1"), ("a1", "t1"))
    combo2 = (("a2", "t2"), ("a3", "t2"))
    rows, planted = [], set()
    for i in range(200):
        row = {f"a{j}": f"t{rng.integers(0, 3)}" for j in range(4)}
        if i < 30:
            row.update(dict(combo1))
            row["a2"], row["a3"] = "t0", "t0"   # keep combo2 clear
            planted.add(f"p{i}")
        elif i < 60:
            row.update(dict(combo2))
            row["a0"], row["a1"] = "t0", "t0"
            planted.add(f"p{i}")
        else:
            # background stays clear of both combos
            if row["a0"] == "t1" and row["a1"] == "t1":
                row["a0"] = "t0"
            if row["a2"] == "t2" and row["a3"] == "t2":
                row["a2"] = "t0"
        rows.append(row)
    samples = [Sample(id=f"p{i}", tags=rows[i]) for i in range(200)]
    pool = TaggedDataset(schema, samples)
    report = ErrorSliceReport(
        model_id="m", threshold_gap=0.2, overall_perf=0.9,
        error_slices=[
            ErrorSliceEntry(key=tuple(sorted(combo1)), count=40, avg_perf=0.1, parents=()),
            ErrorSliceEntry(key=tuple(sorted(combo2)), count=40, avg_perf=0.15, parents=()),
        ],
    )
    # independent membership scan
    def matches(row, combo):
        return all(row[a] == t for a, t in combo)
    scan = {f"p{i}" for i in range(200) if matches(rows[i], combo1) or matches(rows[i], combo2)}
    assert scan == planted
    plan = prioritize_pool(report, pool, budget=len(planted))
    assert set(plan.ids()) == planted


def test_prefix_monotonicity(rng):
    rows = [
        {"a": rng.choice(["x", "y"]), "b": rng.choice(["p", "q"])}
        for _ in range(25)
    ]
    pool = pool_of(rows)
    report = report_of([
        ((("a", "x"), ("b", "p")), 10, 0.1),
        ((("a", "x"),), 12, 0.3),
        ((("b", "q"),), 9, 0.4),
    ])
    previous = []
    for budget in range(1, len(pool) + 1):
        ids = prioritize_pool(report, pool, budget).ids()
        assert len(ids) == budget
        assert ids[: len(previous)] == previous
        previous = ids


def test_budget_beyond_pool_size():
    pool = pool_of([{"a": "x", "b": "p"}, {"a": "y", "b": "q"}])
    report = report_of([((("a", "x"),), 5, 0.1)])
    plan = prioritize_pool(report, pool, budget=10)
    assert len(plan.selections) == 2  # whole pool, no more


def test_selection_invariant_to_record_order():
    rows = [
        {"a": "x", "b": "p"}, {"a": "y", "b": "q"},
        {"a": "x", "b": "q"}, {"a": "y", "b": "p"},
    ]
    ids = ["d", "c", "b", "a"]
    pool1 = pool_of(rows, ids=ids)
    order = [2, 0, 3, 1]
    pool2 = pool_of([rows[i] for i in order], ids=[ids[i] for i in order])
    report = report_of([((("a", "x"),), 5, 0.1), ((("b", "p"),), 5, 0.2)])
    for budget in range(1, 5):
        assert (prioritize_pool(report, pool1, budget).ids()
                == prioritize_pool(report, pool2, budget).ids())


def test_sample_claimed_by_worst_slice_only():
    pool = pool_of([{"a": "x", "b": "p"}])
    report = report_of([
        ((("a", "x"),), 5, 0.1),
        ((("b", "p"),), 5, 0.2),
    ])
    plan = prioritize_pool(report, pool, budget=1)
    assert plan.selections[0].slice_key == (("a", "x"),)


def test_plan_serialization():
    pool = pool_of([{"a": "x", "b": "p"}])
    report = report_of([((("a", "x"),), 5, 0.1)])
    plan = prioritize_pool(report, pool, budget=1)
    doc = json.loads(plan.dumps())
    assert doc["kind"] == "repair-plan"
    assert doc["selections"][0]["id"] == "s0"
    assert doc["selections"][0]["slice_key"] == [["a", "x"]]


# -- group selection -----------------------------------------------------------


def test_group_with_worst_slice_ranks_first():
    rows = [
        {"a": "x", "b": "q"},  # image A object in worst slice
        {"a": "y", "b": "q"},
        {"a": "y", "b": "p"},  # image B objects only in 2nd slice
        {"a": "y", "b": "p"},
    ]
    pool = pool_of(rows, groups=["A", "A", "B", "B"])
    report = report_of([
        ((("a", "x"),), 5, 0.1),
        ((("b", "p"),), 5, 0.5),
    ])
    plan = prioritize_groups(report, pool, budget=2)
    assert plan.ids() == ["A", "B"]
    assert plan.grouped


def test_group_tie_broken_by_match_count():
    rows = [
        {"a": "x", "b": "q"}, {"a": "x", "b": "q"}, {"a": "x", "b": "q"},  # A: 3 matches
        {"a": "x", "b": "q"}, {"a": "y", "b": "q"},                        # B: 1 match
    ]
    pool = pool_of(rows, groups=["A", "A", "A", "B", "B"])
    report = report_of([((("a", "x"),), 5, 0.1)])
    plan = prioritize_groups(report, pool, budget=2)
    assert plan.ids() == ["A", "B"]


def test_group_order_matches_scoring_oracle(rng):
    rows, groups = [], []
    for g in range(12):
        for _ in range(int(rng.integers(1, 5))):
            rows.append({"a": rng.choice(["x", "y"]), "b": rng.choice(["p", "q"])})
            groups.append(f"g{g:02d}")
    pool = pool_of(rows, groups=groups)
    slices = [
        ((("a", "x"), ("b", "p")), 5, 0.1),
        ((("a", "x"),), 9, 0.3),
        ((("b", "q"),), 7, 0.4),
    ]
    report = report_of(slices)
    plan = prioritize_groups(report, pool, budget=12)

    # oracle: best rank per group, tie by matching objects, then id
    def match(row, key):
        return all(row[a] == t for a, t in key)
    scores = {}
    for i, row in enumerate(rows):
        ranks = [r for r, (k, _, _) in enumerate(report_entries(slices)) if match(row, k)]
        g = groups[i]
        best, matched = scores.get(g, (len(slices) + 1, 0))
        if ranks:
            best = min(best, min(ranks))
            matched += 1
        scores[g] = (best, matched)
    matched_groups = sorted(
        (g for g in scores if scores[g][1] > 0),
        key=lambda g: (scores[g][0], -scores[g][1], g),
    )
    unmatched = sorted(g for g in scores if scores[g][1] == 0)
    assert plan.ids() == (matched_groups + unmatched)[:12]


def report_entries(slices):
    return [(tuple(sorted(k)), c, a) for k, c, a in slices]


def test_groups_require_group_keys():
    pool = pool_of([{"a": "x", "b": "p"}])  # no group key
    report = report_of([((("a", "x"),), 5, 0.1)])
    with pytest.raises(DatasetError, match="group"):
        prioritize_groups(report, pool, budget=1)


def test_mean_rank_aggregation_available():
    rows = [
        {"a": "x", "b": "p"},  # A: ranks 0 and 1
        {"a": "x", "b": "q"},  # A: rank 1 only... (see below)
        {"a": "x", "b": "p"},  # B: rank 0 and 1
    ]
    pool = pool_of(rows, groups=["A", "A", "B"])
    report = report_of([((("b", "p"),), 5, 0.1), ((("a", "x"),), 5, 0.2)])
    best = prioritize_groups(report, pool, budget=2, aggregation="best_rank")
    mean = prioritize_groups(report, pool, budget=2, aggregation="mean_rank")
    assert set(best.ids()) == set(mean.ids()) == {"A", "B"}
    with pytest.raises(ValueError):
        prioritize_groups(report, pool, budget=1, aggregation="median")
