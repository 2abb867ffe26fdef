import itertools
import json

import numpy as np
import pytest

from slicescope.analyze import ErrorSliceEntry, ErrorSliceReport
from slicescope.llm import StubLLMClient
from slicescope.predict import (
    HashEmbedding,
    PredictionError,
    TableEmbedding,
    evaluate_predicted,
    instruct_predict,
    nearest_tag,
    substitute_tags,
)
from slicescope.schema import Attribute

from conftest import make_dataset, make_schema


def report_of(keys, overall=0.9, gap=0.2):
    entries = [
        ErrorSliceEntry(key=tuple(sorted(k)), count=10, avg_perf=0.1 + 0.01 * i, parents=())
        for i, k in enumerate(keys)
    ]
    return ErrorSliceReport(
        model_id="m", threshold_gap=gap, overall_perf=overall, error_slices=entries
    )


def test_substitution_forced_argmin():
    schema = make_schema({
        "color": ["red", "crimson", "blue"],
        "shape": ["round", "square"],
    })
    table = TableEmbedding({
        "red": [0.0], "crimson": [0.1], "blue": [1.0],
        "round": [0.0], "square": [5.0],
    })
    report = report_of([
        (("color", "red"), ("shape", "round")),
    ])
    out = substitute_tags(report, schema, table, top_k=5)
    keys = {p.pairs for p in out}
    assert (("color", "crimson"), ("shape", "round")) in keys
    assert (("color", "red"), ("shape", "square")) in keys
    for p in out:
        assert p.source == "tag_substitution"
        assert p.origin == (("color", "red"), ("shape", "round"))
        # exactly one pair differs from the origin
        assert len(set(p.pairs) ^ set(p.origin)) == 2


def test_substitution_tie_breaks_lexicographically():
    schema = make_schema({"v": ["x", "y1", "y2"]})
    table = TableEmbedding({"x": [0.5], "y1": [0.4], "y2": [0.6]})
    assert nearest_tag(schema, table, "v", "x") == "y1"


def test_substitution_never_returns_known_slices():
    schema = make_schema({"color": ["red", "crimson", "blue"]})
    table = TableEmbedding({"red": [0.0], "crimson": [0.1], "blue": [1.0]})
    # the would-be prediction (crimson) is already in the report
    report = report_of([(("color", "red"),), (("color", "crimson"),)])
    out = substitute_tags(report, schema, table, top_k=5)
    keys = {p.pairs for p in out}
    assert (("color", "crimson"),) not in keys


def test_substitution_matches_exhaustive_oracle(rng):
    for seed in range(10):
        r = np.random.default_rng(seed)
        spec = {f"a{i}": [f"t{j}" for j in range(int(r.integers(2, 5)))] for i in range(4)}
        schema = make_schema(spec)
        provider = HashEmbedding(dim=8)
        keys = []
        for _ in range(3):
            attrs = sorted(r.choice(list(spec), size=2, replace=False))
            keys.append(tuple((a, spec[a][r.integers(0, len(spec[a]))]) for a in attrs))
        report = report_of(keys)
        out = substitute_tags(report, schema, provider, top_k=3)
        # oracle: exhaustive nearest neighbour per pair, same dedup rules
        known = {e.key for e in report.error_slices}
        want: list[tuple] = []
        seen = set()
        for entry in report.error_slices:
            for attribute, tag in entry.key:
                ref = provider.embed(tag)
                cands = [t for t in spec[attribute] if t != tag]
                best, best_d = None, None
                for t in sorted(cands):
                    d = float(np.linalg.norm(provider.embed(t) - ref))
                    if best_d is None or d < best_d:
                        best, best_d = t, d
                if best is None:
                    continue
                pairs = tuple(sorted(
                    (a, best if a == attribute else t) for a, t in entry.key
                ))
                if pairs not in known and pairs not in seen:
                    seen.add(pairs)
                    want.append(pairs)
        assert [p.pairs for p in out] == want


def test_substitution_invariant_to_tag_enumeration_order():
    tags = ["m1", "m2", "m3", "m4"]
    provider = HashEmbedding(dim=4)
    report = report_of([(("v", "m1"),)])
    results = set()
    for perm in itertools.permutations(tags):
        schema = make_schema({"v": list(perm)})
        out = substitute_tags(report, schema, provider, top_k=1)
        results.add(tuple(p.pairs for p in out))
    assert len(results) == 1


def test_nearest_tag_none_when_no_alternative():
    # Degenerate single-tag attribute, constructed directly: the pair is
    # skipped rather than substituted.
    attr = Attribute(name="v", category="main_object", tags=("only",), binary=False)

    class OneAttr:
        task = "other"
        attributes = (attr,)

        def attribute(self, name):
            return attr

    assert nearest_tag(OneAttr(), HashEmbedding(), "v", "only") is None


# -- instruction-based prediction ----------------------------------------------


PRED_SCHEMA = make_schema({
    "object color": ["white", "black"],
    "pose": ["sitting", "standing"],
    "brightness": ["low", "high"],
})


def test_instruct_parses_valid_combination():
    response = json.dumps({
        "predictions": [
            {"main object": {"object color": "white", "pose": "sitting"},
             "global": {"brightness": "low"}},
        ]
    })
    client = StubLLMClient(responses=[response])
    out = instruct_predict(PRED_SCHEMA, client, pair_count=3, main_class="bear")
    assert len(out) == 1
    assert out[0].pairs == (("brightness", "low"), ("object color", "white"), ("pose", "sitting"))
    assert out[0].source == "instruction"


def test_instruct_drops_out_of_vocabulary_tag():
    response = json.dumps({
        "predictions": [
            {"main object": {"object color": "chartreuse", "pose": "sitting"},
             "global": {"brightness": "low"}},
            {"main object": {"object color": "white", "pose": "sitting"},
             "global": {"brightness": "low"}},
        ]
    })
    client = StubLLMClient(responses=[response])
    out = instruct_predict(PRED_SCHEMA, client, pair_count=3)
    assert len(out) == 1  # invalid combination dropped, valid one kept


def test_instruct_drops_wrong_pair_count():
    response = json.dumps({
        "predictions": [
            {"main object": {"object color": "white", "pose": "sitting"}},  # 2 pairs
            {"main object": {"object color": "white", "pose": "sitting"},
             "global": {"brightness": "low"}},
        ]
    })
    client = StubLLMClient(responses=[response])
    out = instruct_predict(PRED_SCHEMA, client, pair_count=3)
    assert [p.pairs for p in out] == [
        (("brightness", "low"), ("object color", "white"), ("pose", "sitting"))
    ]


def test_instruct_retries_then_fails():
    client = StubLLMClient(responses=["not json", "also not json", "{\"predictions\": []}"])
    with pytest.raises(PredictionError):
        instruct_predict(PRED_SCHEMA, client, pair_count=3, max_retries=2)
    assert len(client.calls) == 3
    # retry prompts carry the failure description
    assert "invalid" in client.calls[1]["payload"]


def test_instruct_retry_recovers():
    good = json.dumps({
        "predictions": [
            {"main object": {"object color": "black", "pose": "standing"},
             "global": {"brightness": "high"}},
        ]
    })
    client = StubLLMClient(responses=["garbage", good])
    out = instruct_predict(PRED_SCHEMA, client, pair_count=3)
    assert len(out) == 1


# -- degradation evaluation -----------------------------------------------------


def test_degradation_arithmetic():
    schema = make_schema({"a": ["x", "y"]})
    rows = [{"a": "x"}, {"a": "x"}, {"a": "y"}, {"a": "y"}, {"a": "y"}]
    perf = [0.2, 0.4, 1.0, 1.0, 1.0]
    ds = make_dataset(schema, rows, performance=perf)
    from slicescope.predict import PredictedSlice

    pred = [PredictedSlice(pairs=(("a", "x"),), source="instruction")]
    table = evaluate_predicted(pred, ds, min_count=1)
    assert len(table.rows) == 1
    row = table.rows[0]
    assert row.count == 2
    assert row.avg_perf == pytest.approx(0.3)
    assert row.degradation == pytest.approx(0.3 - np.mean(perf))


def test_unmatched_predictions_listed():
    schema = make_schema({"a": ["x", "y"]})
    ds = make_dataset(schema, [{"a": "x"}], performance=[1.0])
    from slicescope.predict import PredictedSlice

    pred = [PredictedSlice(pairs=(("a", "y"),), source="instruction")]
    table = evaluate_predicted(pred, ds, min_count=1)
    assert table.rows == [] and len(table.unmatched) == 1
