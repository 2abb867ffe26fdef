"""Workspace loading and the HTTP service behind the explorer UI.

A workspace is a directory of artifacts produced by the CLI:

    schema.json               attribute schema
    dataset.ndjson            the tagged validation set
    lattice.json              enumerated slice lattice
    models/<model>.json       per-model performance scores by sample id
    marks.log                 mark-basket append log (managed here)

The service is read-mostly: artifacts are loaded once and never mutated;
the only writable state is the mark basket (slices an engineer flagged
for repair), persisted as an append log with compaction.  Long
enumeration runs start as background threads and are observed through a
polling endpoint; reads never block on them.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, unquote, urlparse

import numpy as np

from . import bitvec
from .analyze import (
    ErrorSliceReport,
    ModelSliceView,
    attach_model,
    identify_error_slices,
    postprocess,
    slice_overlap,
)
from .lattice import EnumConfig, SliceKey, SliceLattice, enumerate_efficient, key_to_string
from .schema import AttributeSchema, TaggedDataset, build_index, load_dataset, load_schema
from .synth import with_performance

API_PREFIX = "/api/v1"
API_VERSION = "1"


class WorkspaceError(RuntimeError):
    pass


@dataclass
class ModelEntry:
    model_id: str
    view: ModelSliceView
    report: ErrorSliceReport


class Workspace:
    """Loaded artifacts plus the persistent mark basket."""

    def __init__(self, root: str | Path, threshold_gap: float = 0.2):
        self.root = Path(root)
        self.threshold_gap = threshold_gap
        self.schema: Optional[AttributeSchema] = None
        self.dataset: Optional[TaggedDataset] = None
        self.lattice: Optional[SliceLattice] = None
        self.models: dict[str, ModelEntry] = {}
        self._marks: list[SliceKey] = []
        self._marks_lock = threading.Lock()
        self._load()

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        schema_path = self.root / "schema.json"
        if schema_path.exists():
            self.schema = load_schema(schema_path.read_bytes())
        dataset_path = self.root / "dataset.ndjson"
        if dataset_path.exists():
            if self.schema is None:
                raise WorkspaceError("dataset.ndjson present but schema.json missing")
            self.dataset = load_dataset(self.schema, dataset_path.read_bytes())
        lattice_path = self.root / "lattice.json"
        if lattice_path.exists():
            self.lattice = SliceLattice.loads(lattice_path.read_text())
        models_dir = self.root / "models"
        if models_dir.is_dir() and self.lattice is not None and self.dataset is not None:
            for path in sorted(models_dir.glob("*.json")):
                doc = json.loads(path.read_text())
                model_id = str(doc.get("model_id", path.stem))
                scores = doc["scores"]
                perf = np.array([float(scores[s.id]) for s in self.dataset.samples])
                scored = with_performance(self.dataset, perf)
                view = postprocess(attach_model(self.lattice, scored, model_id))
                report = identify_error_slices(view, self.threshold_gap)
                self.models[model_id] = ModelEntry(model_id=model_id, view=view, report=report)
        self._load_marks()

    # -- mark basket -----------------------------------------------------

    @property
    def marks_path(self) -> Path:
        return self.root / "marks.log"

    def _load_marks(self) -> None:
        self._marks = []
        if not self.marks_path.exists():
            return
        for line in self.marks_path.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue
            key = tuple(sorted((str(a), str(t)) for a, t in rec["key"]))
            if rec.get("op") == "add" and key not in self._marks:
                self._marks.append(key)
            elif rec.get("op") == "remove" and key in self._marks:
                self._marks.remove(key)

    def marks(self) -> list[SliceKey]:
        with self._marks_lock:
            return list(self._marks)

    def known_report_keys(self) -> set[SliceKey]:
        keys: set[SliceKey] = set()
        for entry in self.models.values():
            keys.update(e.key for e in entry.report.error_slices)
        return keys

    def add_mark(self, key: SliceKey) -> None:
        if key not in self.known_report_keys():
            raise KeyError(f"slice {key_to_string(key)} is not in any loaded report")
        with self._marks_lock:
            if key in self._marks:
                return
            self._marks.append(key)
            self._append_mark({"op": "add", "key": [list(p) for p in key]})

    def remove_mark(self, key: SliceKey) -> None:
        with self._marks_lock:
            if key not in self._marks:
                raise KeyError(f"slice {key_to_string(key)} is not marked")
            self._marks.remove(key)
            self._append_mark({"op": "remove", "key": [list(p) for p in key]})

    def _append_mark(self, rec: dict) -> None:
        with open(self.marks_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        self._maybe_compact()

    def _maybe_compact(self) -> None:
        # Rewrite the log as pure adds once it drifts far from the basket.
        lines = self.marks_path.read_text().splitlines()
        if len(lines) > 4 * max(4, len(self._marks)):
            self.compact_marks()

    def compact_marks(self) -> None:
        tmp = self.marks_path.with_suffix(".log.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for key in self._marks:
                fh.write(json.dumps({"op": "add", "key": [list(p) for p in key]}) + "\n")
        tmp.replace(self.marks_path)


@dataclass
class Job:
    job_id: str
    status: str = "running"  # running | done | error
    error: str = ""
    seconds: float = 0.0
    out_path: str = ""
    slices: int = 0


class JobRunner:
    """Background enumeration jobs with polling status."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self.jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def start_enumerate(self, depth: int, min_count: int, out_name: str) -> Job:
        if self.workspace.dataset is None:
            raise WorkspaceError("workspace has no dataset to enumerate")
        job = Job(job_id=uuid.uuid4().hex[:12], out_path=str(self.workspace.root / out_name))
        with self._lock:
            self.jobs[job.job_id] = job

        def run() -> None:
            t0 = time.perf_counter()
            try:
                index = build_index(self.workspace.dataset)
                lattice = enumerate_efficient(
                    index, EnumConfig(max_depth=depth, min_count=min_count)
                )
                Path(job.out_path).write_text(lattice.dumps())
                job.slices = len(lattice)
                job.status = "done"
            except Exception as exc:  # surfaced via the status endpoint
                job.status = "error"
                job.error = str(exc)
            finally:
                job.seconds = time.perf_counter() - t0

        threading.Thread(target=run, daemon=True).start()
        return job

    def get(self, job_id: str) -> Optional[Job]:
        with self._lock:
            return self.jobs.get(job_id)


INTERFACE_DESCRIPTION = {
    "version": API_VERSION,
    "kind": "interface-description",
    "prefix": API_PREFIX,
    "endpoints": [
        {"method": "GET", "path": "/interface", "returns": ["version", "kind", "prefix", "endpoints"]},
        {"method": "GET", "path": "/models", "returns": ["version", "models"],
         "model_fields": ["model_id", "overall_perf", "error_slices"]},
        {"method": "GET", "path": "/schema", "returns": ["version", "task", "main object", "background", "global"]},
        {"method": "GET", "path": "/report/{model}", "params": ["offset", "limit"],
         "returns": ["version", "model_id", "C", "overall_perf", "total", "offset", "limit", "slices"],
         "slice_fields": ["key", "count", "avg_perf", "depth"]},
        {"method": "GET", "path": "/slice", "params": ["key", "model"],
         "returns": ["version", "key", "count", "depth", "parents", "children", "models"],
         "child_fields": ["key", "count", "avg_perf (with model param)"],
         "model_fields": ["model_id", "avg_perf", "retained", "is_error_slice"]},
        {"method": "GET", "path": "/slice/samples", "params": ["key", "tags"],
         "returns": ["version", "key", "ids", "tags (with tags=1)"]},
        {"method": "GET", "path": "/overlap", "params": ["a", "b", "fraction"],
         "returns": ["version", "a", "b", "fraction", "overlap", "symmetric_overlap"]},
        {"method": "GET", "path": "/marks", "returns": ["version", "marks"]},
        {"method": "POST", "path": "/marks", "body": ["key"], "returns": ["version", "marks"]},
        {"method": "DELETE", "path": "/marks", "params": ["key"], "returns": ["version", "marks"]},
        {"method": "GET", "path": "/marks/export", "params": ["pool", "budget"],
         "returns": ["version", "kind", "command", "marks"]},
        {"method": "POST", "path": "/jobs/enumerate", "body": ["depth", "min_count", "out"],
         "returns": ["version", "job_id", "status"]},
        {"method": "GET", "path": "/jobs/{id}",
         "returns": ["version", "job_id", "status", "seconds", "slices", "error"]},
    ],
}


def _parse_key(text: str) -> SliceKey:
    pairs = json.loads(text)
    return tuple(sorted((str(a), str(t)) for a, t in pairs))


class _Handler(BaseHTTPRequestHandler):
    workspace: Workspace
    jobs: JobRunner
    static_dir: Optional[Path] = None

    # -- plumbing --------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, doc: dict, status: int = 200) -> None:
        body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json({"version": API_VERSION, "error": message}, status=status)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length).decode("utf-8"))

    # -- routing ---------------------------------------------------------

    def do_GET(self):
        parsed = urlparse(self.path)
        path = parsed.path
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        if not path.startswith(API_PREFIX):
            return self._serve_static(path)
        route = path[len(API_PREFIX):] or "/"
        try:
            if route == "/interface":
                return self._send_json(INTERFACE_DESCRIPTION)
            if route == "/models":
                return self._get_models()
            if route == "/schema":
                return self._get_schema()
            if route.startswith("/report/"):
                return self._get_report(unquote(route[len("/report/"):]), query)
            if route == "/slice":
                return self._get_slice(query)
            if route == "/slice/samples":
                return self._get_samples(query)
            if route == "/overlap":
                return self._get_overlap(query)
            if route == "/marks":
                return self._send_json(self._marks_doc())
            if route == "/marks/export":
                return self._get_export(query)
            if route.startswith("/jobs/"):
                return self._get_job(route[len("/jobs/"):])
            return self._error(404, f"unknown endpoint {route}")
        except (json.JSONDecodeError, ValueError) as exc:
            return self._error(400, str(exc))

    def do_POST(self):
        parsed = urlparse(self.path)
        route = parsed.path[len(API_PREFIX):] if parsed.path.startswith(API_PREFIX) else None
        try:
            body = self._read_body()
        except json.JSONDecodeError as exc:
            return self._error(400, f"malformed JSON body: {exc}")
        try:
            if route == "/marks":
                if "key" not in body:
                    return self._error(400, "body must carry 'key'")
                key = tuple(sorted((str(a), str(t)) for a, t in body["key"]))
                try:
                    self.workspace.add_mark(key)
                except KeyError as exc:
                    return self._error(400, str(exc))
                return self._send_json(self._marks_doc())
            if route == "/jobs/enumerate":
                job = self.jobs.start_enumerate(
                    depth=int(body.get("depth", 3)),
                    min_count=int(body.get("min_count", 10)),
                    out_name=str(body.get("out", "lattice.job.json")),
                )
                return self._send_json(
                    {"version": API_VERSION, "job_id": job.job_id, "status": job.status}
                )
            return self._error(404, f"unknown endpoint {route}")
        except (ValueError, WorkspaceError) as exc:
            return self._error(400, str(exc))

    def do_DELETE(self):
        parsed = urlparse(self.path)
        route = parsed.path[len(API_PREFIX):] if parsed.path.startswith(API_PREFIX) else None
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        if route == "/marks":
            if "key" not in query:
                return self._error(400, "missing 'key' parameter")
            try:
                key = _parse_key(query["key"])
                self.workspace.remove_mark(key)
            except KeyError as exc:
                return self._error(404, str(exc))
            except (json.JSONDecodeError, ValueError) as exc:
                return self._error(400, str(exc))
            return self._send_json(self._marks_doc())
        return self._error(404, f"unknown endpoint {route}")

    # -- endpoint bodies --------------------------------------------------

    def _get_models(self):
        models = [
            {
                "model_id": e.model_id,
                "overall_perf": e.view.overall_perf,
                "error_slices": len(e.report.error_slices),
            }
            for e in self.workspace.models.values()
        ]
        self._send_json({"version": API_VERSION, "models": models})

    def _get_schema(self):
        if self.workspace.schema is None:
            return self._error(404, "workspace has no schema")
        self._send_json(self.workspace.schema.to_document())

    def _get_report(self, model_id: str, query: dict):
        entry = self.workspace.models.get(model_id)
        if entry is None:
            return self._error(404, f"unknown model {model_id!r}")
        offset = int(query.get("offset", 0))
        limit = int(query.get("limit", 50))
        page = entry.report.error_slices[offset : offset + limit]
        self._send_json(
            {
                "version": API_VERSION,
                "model_id": model_id,
                "C": entry.report.threshold_gap,
                "overall_perf": entry.report.overall_perf,
                "total": len(entry.report.error_slices),
                "offset": offset,
                "limit": limit,
                "slices": [
                    {
                        "key": [list(p) for p in e.key],
                        "count": e.count,
                        "avg_perf": e.avg_perf,
                        "depth": len(e.key),
                    }
                    for e in page
                ],
            }
        )

    def _get_slice(self, query: dict):
        lattice = self.workspace.lattice
        if lattice is None:
            return self._error(404, "workspace has no lattice")
        if "key" not in query:
            return self._error(400, "missing 'key' parameter")
        key = _parse_key(query["key"])
        s = lattice.get(key)
        if s is None:
            return self._error(404, f"slice {key_to_string(key)} not in lattice")
        model_filter = query.get("model")
        children = lattice.children(key)
        filtered_entry = None
        if model_filter:
            filtered_entry = self.workspace.models.get(model_filter)
            if filtered_entry is None:
                return self._error(404, f"unknown model {model_filter!r}")
            children = [c for c in children if filtered_entry.view.retained[c]]
        children_doc = []
        for ck in children:
            rec = {"key": [list(p) for p in ck], "count": lattice.get(ck).count}
            if filtered_entry is not None:
                rec["avg_perf"] = filtered_entry.view.avg_perf[ck]
            children_doc.append(rec)
        models = []
        for e in self.workspace.models.values():
            avg = e.view.avg_perf.get(key)
            models.append(
                {
                    "model_id": e.model_id,
                    "avg_perf": avg,
                    "retained": bool(e.view.retained.get(key, False)),
                    "is_error_slice": any(x.key == key for x in e.report.error_slices),
                }
            )
        self._send_json(
            {
                "version": API_VERSION,
                "key": [list(p) for p in key],
                "count": s.count,
                "depth": s.depth,
                "parents": [[list(p) for p in pk] for pk in lattice.parents(key)],
                "children": children_doc,
                "models": models,
            }
        )

    def _get_samples(self, query: dict):
        lattice = self.workspace.lattice
        dataset = self.workspace.dataset
        if lattice is None or dataset is None:
            return self._error(404, "workspace needs a lattice and a dataset")
        if "key" not in query:
            return self._error(400, "missing 'key' parameter")
        key = _parse_key(query["key"])
        s = lattice.get(key)
        if s is None:
            return self._error(404, f"slice {key_to_string(key)} not in lattice")
        idx = bitvec.indices(s.members, lattice.n_samples)
        ids = [dataset.samples[i].id for i in idx]
        doc = {"version": API_VERSION, "key": [list(p) for p in key], "ids": ids}
        if query.get("tags") in ("1", "true"):
            doc["tags"] = {dataset.samples[i].id: dataset.samples[i].tags for i in idx}
        self._send_json(doc)

    def _get_overlap(self, query: dict):
        a = self.workspace.models.get(query.get("a", ""))
        b = self.workspace.models.get(query.get("b", ""))
        if a is None or b is None:
            missing = query.get("a") if a is None else query.get("b")
            return self._error(404, f"unknown model {missing!r}")
        fraction = float(query.get("fraction", 0.1))
        self._send_json(
            {
                "version": API_VERSION,
                "a": a.model_id,
                "b": b.model_id,
                "fraction": fraction,
                "overlap": slice_overlap(a.report, b.report, fraction),
                "symmetric_overlap": slice_overlap(a.report, b.report, fraction, symmetric=True),
            }
        )

    def _marks_doc(self) -> dict:
        return {
            "version": API_VERSION,
            "marks": [[list(p) for p in key] for key in self.workspace.marks()],
        }

    def _get_export(self, query: dict):
        marks = self.workspace.marks()
        pool = query.get("pool", "pool.ndjson")
        budget = int(query.get("budget", 100))
        # Paths are workspace-relative: the command is meant to be run
        # from the workspace root.
        command = [
            "slicescope", "select",
            "--schema", "schema.json",
            "--report", "report.json",
            "--pool", pool,
            "--budget", str(budget),
            "--marks", "marks.json",
            "--out", "plan.json",
        ]
        self._send_json(
            {
                "version": API_VERSION,
                "kind": "select-manifest",
                "command": command,
                "marks": [[list(p) for p in key] for key in marks],
            }
        )

    def _get_job(self, job_id: str):
        job = self.jobs.get(job_id)
        if job is None:
            return self._error(404, f"unknown job {job_id!r}")
        self._send_json(
            {
                "version": API_VERSION,
                "job_id": job.job_id,
                "status": job.status,
                "seconds": job.seconds,
                "slices": job.slices,
                "error": job.error,
            }
        )

    def _serve_static(self, path: str):
        if self.static_dir is None:
            return self._error(404, "no static directory mounted")
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return self._error(404, f"no such file {rel}")
        body = target.read_bytes()
        ctype = {
            ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
            ".json": "application/json", ".png": "image/png", ".jpg": "image/jpeg",
            ".svg": "image/svg+xml",
        }.get(target.suffix, "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def serve(
    workspace: Workspace,
    host: str = "127.0.0.1",
    port: int = 8765,
    static_dir: Optional[str] = None,
) -> ThreadingHTTPServer:
    """Create the HTTP server (caller runs serve_forever or a thread)."""
    handler = type(
        "WorkspaceHandler",
        (_Handler,),
        {
            "workspace": workspace,
            "jobs": JobRunner(workspace),
            "static_dir": Path(static_dir) if static_dir else None,
        },
    )
    return ThreadingHTTPServer((host, port), handler)
