"""Record service-response fixtures for the explorer's contract tests.

Builds a small deterministic workspace, runs the real HTTP service in a
thread, captures the responses the UI consumes, and writes them under
frontend/fixtures/. Rerun after changing the service or the workspace
recipe; the contract tests compare the viewmodel against these files
field for field.
"""

import json
import threading
import urllib.parse
import urllib.request
from pathlib import Path

import numpy as np

from slicescope.lattice import EnumConfig, enumerate_efficient
from slicescope.schema import AttributeSchema, Sample, TaggedDataset, build_index, make_attribute
from slicescope.service import Workspace, serve

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def build_workspace(root: Path) -> None:
    rng = np.random.default_rng(20240202)
    attrs = (
        make_attribute("object color", "main_object", ["white", "brown", "black"]),
        make_attribute("is partially occluded", "main_object", ["yes", "no"]),
        make_attribute("background style", "background", ["urban", "natural", "indoors"]),
        make_attribute("brightness", "global", ["high", "medium", "low"]),
    )
    schema = AttributeSchema(attributes=attrs, task="classification")
    rows = []
    for i in range(300):
        rows.append({
            "object color": ["white", "brown", "black"][rng.integers(0, 3)],
            "is partially occluded": ["yes", "no"][rng.integers(0, 2)],
            "background style": ["urban", "natural", "indoors"][rng.integers(0, 3)],
            "brightness": ["high", "medium", "low"][rng.integers(0, 3)],
        })
    # make one combination well-supported so depth-3 slices exist
    for i in range(60):
        rows[i]["object color"] = "white"
        rows[i]["is partially occluded"] = "yes"
    ds = TaggedDataset(schema, [Sample(id=f"s{i:04d}", tags=t) for i, t in enumerate(rows)])
    lattice = enumerate_efficient(build_index(ds), EnumConfig(max_depth=3, min_count=10))
    (root / "schema.json").write_text(schema.dumps())
    (root / "dataset.ndjson").write_text(ds.dumps())
    (root / "lattice.json").write_text(lattice.dumps())
    (root / "models").mkdir()
    hard = {
        "m1": lambda t: t["object color"] == "white" and t["is partially occluded"] == "yes",
        "m2": lambda t: t["brightness"] == "low",
    }
    for model, is_hard in hard.items():
        scores = {s.id: (0.3 if is_hard(s.tags) else 0.9) for s in ds.samples}
        (root / "models" / f"{model}.json").write_text(
            json.dumps({"model_id": model, "scores": scores})
        )


def record(base: str, path: str, name: str) -> dict:
    with urllib.request.urlopen(base + path) as resp:
        doc = json.loads(resp.read())
    (FIXTURES / f"{name}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"recorded {name}.json  <-  GET {path}")
    return doc


def post(base: str, path: str, doc: dict) -> dict:
    req = urllib.request.Request(
        base + path, data=json.dumps(doc).encode(), method="POST",
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def main() -> None:
    import tempfile

    FIXTURES.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        build_workspace(root)
        workspace = Workspace(root)
        server = serve(workspace, port=0)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        base = f"http://127.0.0.1:{server.server_address[1]}"

        record(base, "/api/v1/interface", "interface")
        record(base, "/api/v1/models", "models")
        record(base, "/api/v1/schema", "schema")
        m1 = record(base, "/api/v1/report/m1?offset=0&limit=10", "report_m1")
        record(base, "/api/v1/report/m2?offset=0&limit=10", "report_m2")

        # drill into the known hard depth-1 slice (it has retained children)
        drill_key = [["is partially occluded", "yes"]]
        enc = urllib.parse.quote(json.dumps(drill_key))
        record(base, f"/api/v1/slice?key={enc}&model=m1", "slice_detail")
        record(base, f"/api/v1/slice/samples?key={enc}", "slice_samples")

        record(base, "/api/v1/overlap?a=m1&b=m2&fraction=0.1", "overlap")

        post(base, "/api/v1/marks", {"key": m1["slices"][0]["key"]})
        post(base, "/api/v1/marks", {"key": m1["slices"][1]["key"]})
        record(base, "/api/v1/marks", "marks")
        record(base, "/api/v1/marks/export?budget=100&pool=pool.ndjson", "export")
        server.shutdown()
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
