import json

import pytest

from slicescope.cli import run_cli
from slicescope.schema import load_dataset, load_schema

from conftest import make_dataset, make_schema


@pytest.fixture
def artifacts(tmp_path, rng):
    """Schema + dataset + scores files for a small planted setup."""
    spec = {f"a{i}": [f"t{j}" for j in range(3)] for i in range(4)}
    schema = make_schema(spec)
    (tmp_path / "schema.json").write_text(schema.dumps())
    rows = [
        {name: f"t{rng.integers(0, 3)}" for name in spec}
        for _ in range(240)
    ]
    for i in range(40):
        rows[i]["a0"] = "t1"
        rows[i]["a2"] = "t2"
    ds = make_dataset(schema, rows)
    (tmp_path / "dataset.ndjson").write_text(ds.dumps())
    scores = {
        s.id: (0.2 if s.tags["a0"] == "t1" and s.tags["a2"] == "t2" else 0.95)
        for s in ds.samples
    }
    (tmp_path / "scores.json").write_text(json.dumps({"model_id": "m1", "scores": scores}))
    return tmp_path


def run_ok(args):
    assert run_cli(args) == 0


def test_enumerate_analyze_overlap_predict_select(artifacts, capsys):
    t = artifacts
    run_ok(["enumerate", "--schema", str(t / "schema.json"), "--dataset", str(t / "dataset.ndjson"),
            "--depth", "3", "--min-count", "10", "--algo", "efficient",
            "--out", str(t / "lattice.json")])
    run_ok(["analyze", "--schema", str(t / "schema.json"), "--dataset", str(t / "dataset.ndjson"),
            "--lattice", str(t / "lattice.json"), "--perf", str(t / "scores.json"),
            "--C", "0.2", "--out", str(t / "report.json")])
    report = json.loads((t / "report.json").read_text())
    assert report["model_id"] == "m1" and report["error_slices"]
    top = report["error_slices"][0]
    assert set(map(tuple, top["key"])) <= {("a0", "t1"), ("a2", "t2")}

    run_ok(["overlap", "--a", str(t / "report.json"), "--b", str(t / "report.json")])
    out = capsys.readouterr().out
    assert json.loads(out.strip().splitlines()[-1])["overlap"] == 1.0

    run_ok(["predict", "--mode", "substitute", "--schema", str(t / "schema.json"),
            "--report", str(t / "report.json"), "--dataset", str(t / "dataset.ndjson"),
            "--perf", str(t / "scores.json"), "--out", str(t / "pred.json")])
    pred = json.loads((t / "pred.json").read_text())
    assert pred["slices"] and "degradation" in pred

    run_ok(["select", "--schema", str(t / "schema.json"), "--report", str(t / "report.json"),
            "--pool", str(t / "dataset.ndjson"), "--budget", "10",
            "--out", str(t / "plan.json")])
    plan = json.loads((t / "plan.json").read_text())
    assert len(plan["selections"]) == 10


def test_enumerate_naive_and_tree_write_same_slices(artifacts):
    t = artifacts
    for algo in ("naive", "tree", "efficient"):
        run_ok(["enumerate", "--schema", str(t / "schema.json"),
                "--dataset", str(t / "dataset.ndjson"), "--depth", "2",
                "--min-count", "5", "--algo", algo,
                "--out", str(t / f"lat_{algo}.json")])
    docs = [json.loads((t / f"lat_{a}.json").read_text()) for a in ("naive", "tree", "efficient")]
    def keyset(doc):
        return {
            (tuple(map(tuple, rec["key"])), rec["count"])
            for layer in doc["layers"] for rec in layer
        }
    assert keyset(docs[0]) == keyset(docs[1]) == keyset(docs[2])


def test_analyze_dimension_mismatch_fails(artifacts, capsys):
    t = artifacts
    run_ok(["enumerate", "--schema", str(t / "schema.json"), "--dataset", str(t / "dataset.ndjson"),
            "--depth", "2", "--min-count", "5", "--out", str(t / "lattice.json")])
    # truncate the dataset: lattice size no longer matches
    lines = (t / "dataset.ndjson").read_text().splitlines()
    (t / "short.ndjson").write_text("\n".join(lines[:100]))
    rc = run_cli(["analyze", "--schema", str(t / "schema.json"), "--dataset", str(t / "short.ndjson"),
                  "--lattice", str(t / "lattice.json"), "--perf", str(t / "scores.json"),
                  "--out", str(t / "r.json")])
    assert rc != 0
    err = capsys.readouterr().err
    assert "error" in err and "lattice" in err


def test_unknown_args_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        run_cli(["enumerate", "--bogus-flag"])
    assert exc.value.code != 0


def test_missing_file_exits_nonzero(tmp_path, capsys):
    rc = run_cli(["analyze", "--schema", str(tmp_path / "nope.json"),
                  "--dataset", "x", "--lattice", "y", "--out", "z"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_generate_tag_round_trip(tmp_path):
    run_ok(["generate", "--task", "pose_estimation", "--classes", "person",
            "--count", "4", "--pairs", "1", "--review-subset", "2",
            "--out", str(tmp_path / "schema.json"),
            "--transcript", str(tmp_path / "transcript.json")])
    schema = load_schema((tmp_path / "schema.json").read_bytes())
    assert len(schema.attributes) == 46
    assert (tmp_path / "transcript.json").exists()
    run_ok(["tag", "--schema", str(tmp_path / "schema.json"), "--count", "30",
            "--threads", "4", "--out", str(tmp_path / "tagged.ndjson")])
    ds = load_dataset(schema, (tmp_path / "tagged.ndjson").read_bytes())
    assert len(ds) == 30


def test_select_with_marks_pins_ranking(artifacts):
    t = artifacts
    run_ok(["enumerate", "--schema", str(t / "schema.json"), "--dataset", str(t / "dataset.ndjson"),
            "--depth", "2", "--min-count", "5", "--out", str(t / "lattice.json")])
    run_ok(["analyze", "--schema", str(t / "schema.json"), "--dataset", str(t / "dataset.ndjson"),
            "--lattice", str(t / "lattice.json"), "--perf", str(t / "scores.json"),
            "--out", str(t / "report.json")])
    report = json.loads((t / "report.json").read_text())
    assert len(report["error_slices"]) >= 2
    pinned_key = report["error_slices"][-1]["key"]  # pin the last slice to the top
    (t / "marks.json").write_text(json.dumps({"marks": [pinned_key]}))
    run_ok(["select", "--schema", str(t / "schema.json"), "--report", str(t / "report.json"),
            "--pool", str(t / "dataset.ndjson"), "--budget", "3",
            "--marks", str(t / "marks.json"), "--out", str(t / "plan.json")])
    plan = json.loads((t / "plan.json").read_text())
    assert plan["selections"][0]["slice_key"] == sorted(map(list, map(tuple, pinned_key)))


def test_bench_smoke(capsys):
    run_ok(["bench", "--n", "400", "--depth", "2", "--min-count", "5"])
    out = capsys.readouterr().out
    assert "speedup" in out and "efficient" in out
