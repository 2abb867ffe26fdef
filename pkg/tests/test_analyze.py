import numpy as np
import pytest

from slicescope.analyze import (
    ErrorSliceReport,
    attach_model,
    identify_error_slices,
    postprocess,
    slice_overlap,
)
from slicescope.lattice import EnumConfig, enumerate_efficient
from slicescope.schema import build_index

from conftest import brute_force_members, make_dataset, make_schema


def build_view(schema, rows, performance, min_count=1, max_depth=2, model_id="m"):
    ds = make_dataset(schema, rows, performance=performance)
    index = build_index(ds)
    lattice = enumerate_efficient(index, EnumConfig(max_depth=max_depth, min_count=min_count))
    return ds, lattice, attach_model(lattice, ds, model_id)


def random_rows(rng, n, spec):
    return [
        {name: tags[rng.integers(0, len(tags))] for name, tags in spec.items()}
        for _ in range(n)
    ]


def test_slice_average_of_half():
    schema = make_schema({"color": ["red", "blue"]})
    rows = [{"color": "red"}, {"color": "red"}, {"color": "blue"}, {"color": "blue"}]
    ds, lattice, view = build_view(schema, rows, [1.0, 0.0, 1.0, 1.0])
    assert view.avg_perf[(("color", "red"),)] == pytest.approx(0.5)
    assert view.overall_perf == pytest.approx(0.75)


def test_all_perfect_model():
    schema = make_schema({"color": ["red", "blue"]})
    rows = [{"color": "red"}, {"color": "blue"}]
    ds, lattice, view = build_view(schema, rows, [1.0, 1.0])
    assert view.overall_perf == 1.0
    assert all(v == 1.0 for v in view.avg_perf.values())


def test_averages_match_scan_oracle(rng):
    spec = {f"a{i}": [f"t{j}" for j in range(3)] for i in range(4)}
    schema = make_schema(spec)
    rows = random_rows(rng, 300, spec)
    perf = rng.random(300).round(6).tolist()
    ds, lattice, view = build_view(schema, rows, perf, min_count=3, max_depth=3)
    perf_arr = np.array(perf)
    for key, avg in view.avg_perf.items():
        members = brute_force_members(ds, key)
        assert avg == pytest.approx(perf_arr[members].mean())
        lo, hi = perf_arr[members].min(), perf_arr[members].max()
        assert lo <= avg <= hi


def test_dimension_mismatch_rejected():
    schema = make_schema({"color": ["red", "blue"]})
    rows = [{"color": "red"}, {"color": "blue"}]
    ds, lattice, _ = build_view(schema, rows, [1.0, 1.0])
    shorter = make_dataset(schema, rows[:1], performance=[1.0])
    with pytest.raises(ValueError, match="lattice"):
        attach_model(lattice, shorter)


def test_missing_performance_rejected():
    schema = make_schema({"color": ["red", "blue"]})
    ds = make_dataset(schema, [{"color": "red"}])
    index = build_index(ds)
    lattice = enumerate_efficient(index, EnumConfig(max_depth=1, min_count=1))
    with pytest.raises(Exception, match="performance"):
        attach_model(lattice, ds)


# -- postprocess --------------------------------------------------------------


def _view_with_averages(avgs):
    """Build a real 2-attribute view, then overwrite the averages."""
    schema = make_schema({"a": ["x", "y"], "b": ["p", "q"]})
    rows = [
        {"a": "x", "b": "p"}, {"a": "x", "b": "q"},
        {"a": "y", "b": "p"}, {"a": "y", "b": "q"},
    ]
    ds, lattice, view = build_view(schema, rows, [1.0, 1.0, 1.0, 1.0])
    view.avg_perf.update(avgs)
    return view


def test_child_below_both_parents_retained():
    child = (("a", "x"), ("b", "p"))
    view = _view_with_averages({
        (("a", "x"),): 0.5, (("b", "p"),): 0.7, child: 0.4,
    })
    out = postprocess(view)
    assert out.retained[child]


def test_child_above_min_parent_removed():
    child = (("a", "x"), ("b", "p"))
    view = _view_with_averages({
        (("a", "x"),): 0.5, (("b", "p"),): 0.7, child: 0.6,
    })
    out = postprocess(view)
    assert not out.retained[child]


def test_child_equal_to_min_parent_retained():
    child = (("a", "x"), ("b", "p"))
    view = _view_with_averages({
        (("a", "x"),): 0.5, (("b", "p"),): 0.7, child: 0.5,
    })
    assert postprocess(view).retained[child]


def test_postprocess_matches_rule_oracle_and_idempotent(rng):
    spec = {f"a{i}": [f"t{j}" for j in range(3)] for i in range(4)}
    schema = make_schema(spec)
    rows = random_rows(rng, 250, spec)
    perf = rng.random(250).tolist()
    ds, lattice, view = build_view(schema, rows, perf, min_count=2, max_depth=3)
    out = postprocess(view)
    # independent reimplementation of the rule over all parent links
    for s in lattice.all_slices():
        if s.depth == 1:
            assert out.retained[s.pairs]
        else:
            want = all(
                view.avg_perf[s.pairs] <= view.avg_perf[p]
                for p in lattice.parents(s.pairs)
            )
            assert out.retained[s.pairs] == want
    again = postprocess(out)
    assert again.retained == out.retained


# -- identify_error_slices ----------------------------------------------------


def test_threshold_is_inclusive(rng):
    schema = make_schema({"color": ["red", "blue"]})
    rows = [{"color": "red"}] * 5 + [{"color": "blue"}] * 5
    # red avg 0.7, blue avg 1.0 -> overall 0.85; C=0.15 puts the cutoff at 0.7
    perf = [0.7] * 5 + [1.0] * 5
    ds, lattice, view = build_view(schema, rows, perf)
    report = identify_error_slices(postprocess(view), 0.15)
    assert [e.key for e in report.error_slices] == [(("color", "red"),)]


def test_invalid_threshold_rejected():
    schema = make_schema({"color": ["red", "blue"]})
    ds, lattice, view = build_view(schema, [{"color": "red"}, {"color": "blue"}], [1.0, 1.0])
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            identify_error_slices(postprocess(view), bad)


def test_empty_report_is_valid():
    schema = make_schema({"color": ["red", "blue"]})
    ds, lattice, view = build_view(schema, [{"color": "red"}, {"color": "blue"}], [0.9, 0.9])
    report = identify_error_slices(postprocess(view), 0.5)
    assert report.error_slices == []


def test_planted_bad_slice_tops_ranking(rng):
    spec = {f"a{i}": [f"t{j}" for j in range(3)] for i in range(5)}
    schema = make_schema(spec)
    combo = (("a1", "t2"), ("a3", "t0"))
    rows = random_rows(rng, 400, spec)
    perf = []
    for r in rows:
        perf.append(0.2 if all(r[a] == t for a, t in combo) else 0.95)
    # guarantee enough members
    for i in range(30):
        rows[i].update(dict(combo))
        perf[i] = 0.2
    ds, lattice, view = build_view(schema, rows, perf, min_count=10, max_depth=3)
    report = identify_error_slices(postprocess(view), 0.2)
    assert report.error_slices, "planted slice must be found"
    top = report.error_slices[0]
    assert top.avg_perf == pytest.approx(0.2)
    assert set(top.key) <= set(combo) or set(combo) <= set(top.key)


def test_ordering_is_total(rng):
    spec = {f"a{i}": [f"t{j}" for j in range(2)] for i in range(3)}
    schema = make_schema(spec)
    rows = random_rows(rng, 100, spec)
    perf = (rng.random(100) * 0.3).tolist()
    ds, lattice, view = build_view(schema, rows, perf, min_count=2, max_depth=3, model_id="m1")
    report = identify_error_slices(postprocess(view), 0.1)
    keys = [(e.avg_perf, -e.count, e.key) for e in report.error_slices]
    assert keys == sorted(keys)
    report2 = identify_error_slices(postprocess(view), 0.1)
    assert [e.key for e in report2.error_slices] == [e.key for e in report.error_slices]


def test_report_round_trip(rng):
    spec = {f"a{i}": [f"t{j}" for j in range(2)] for i in range(3)}
    schema = make_schema(spec)
    rows = random_rows(rng, 120, spec)
    perf = (rng.random(120) * 0.5).tolist()
    ds, lattice, view = build_view(schema, rows, perf, min_count=2, max_depth=2)
    report = identify_error_slices(postprocess(view), 0.2)
    again = ErrorSliceReport.loads(report.dumps())
    assert again.dumps() == report.dumps()
    assert [e.key for e in again.error_slices] == [e.key for e in report.error_slices]


# -- slice_overlap ------------------------------------------------------------


def _report_from(view, gap=0.2):
    return identify_error_slices(postprocess(view), gap)


def test_overlap_identical_reports(rng):
    spec = {f"a{i}": [f"t{j}" for j in range(2)] for i in range(3)}
    schema = make_schema(spec)
    rows = random_rows(rng, 100, spec)
    perf = (rng.random(100) * 0.4).tolist()
    ds, lattice, view = build_view(schema, rows, perf, min_count=2)
    report = _report_from(view)
    assert slice_overlap(report, report, 0.1) == 1.0


def test_overlap_disjoint_top_sets():
    schema = make_schema({"a": ["x", "y"], "b": ["p", "q"]})
    rows = [
        {"a": "x", "b": "p"}, {"a": "x", "b": "q"},
        {"a": "y", "b": "p"}, {"a": "y", "b": "q"},
    ] * 5
    # model 1 fails on (a,x); model 2 fails on (b,p): depth-1 slices only,
    # so the two reports share nothing.
    perf1 = [0.1 if r["a"] == "x" else 0.9 for r in rows]
    perf2 = [0.1 if r["b"] == "p" else 0.9 for r in rows]
    ds1, lattice, v1 = build_view(schema, rows, perf1, model_id="m1", max_depth=1)
    v2 = attach_model(lattice, make_dataset(schema, rows, performance=perf2), "m2")
    r1, r2 = _report_from(v1), _report_from(v2)
    assert r1.error_slices and r2.error_slices
    assert slice_overlap(r1, r2, fraction=1.0) == 0.0


def test_overlap_twin_models_share_planted_slice(rng):
    # Two synthetic twins failing on the same planted hard slice: their
    # worst slices coincide, so the top-fraction overlap is high.
    spec = {f"a{i}": [f"t{j}" for j in range(3)] for i in range(4)}
    schema = make_schema(spec)
    rows = random_rows(rng, 300, spec)
    combo = (("a0", "t1"), ("a2", "t2"))
    for i in range(40):
        rows[i].update(dict(combo))
    hard = np.array([all(r[a] == t for a, t in combo) for r in rows])
    jitter = rng.normal(0, 0.02, 300)
    perf1 = np.where(hard, 0.15, np.clip(0.92 + jitter, 0, 1)).tolist()
    perf2 = np.where(hard, 0.15, np.clip(0.92 - jitter, 0, 1)).tolist()
    ds, lattice, v1 = build_view(schema, rows, perf1, min_count=5, max_depth=3, model_id="m1")
    v2 = attach_model(lattice, make_dataset(schema, rows, performance=perf2), "m2")
    r1, r2 = _report_from(v1), _report_from(v2)
    assert slice_overlap(r1, r2, fraction=0.1, symmetric=True) >= 0.8


def test_overlap_mismatched_lattices_rejected(rng):
    spec = {"a": ["x", "y"]}
    schema = make_schema(spec)
    rows1 = [{"a": "x"}] * 10 + [{"a": "y"}] * 10
    rows2 = [{"a": "x"}] * 12 + [{"a": "y"}] * 8
    ds1, l1, v1 = build_view(schema, rows1, [0.1] * 10 + [0.9] * 10)
    ds2, l2, v2 = build_view(schema, rows2, [0.1] * 12 + [0.9] * 8)
    with pytest.raises(ValueError, match="different lattices"):
        slice_overlap(_report_from(v1), _report_from(v2))


def test_overlap_fraction_validated(rng):
    schema = make_schema({"a": ["x", "y"]})
    ds, lattice, view = build_view(schema, [{"a": "x"}, {"a": "y"}], [0.1, 0.9])
    report = _report_from(view)
    with pytest.raises(ValueError):
        slice_overlap(report, report, fraction=0.0)
