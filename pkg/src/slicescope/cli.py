"""Command-line entry point.

Subcommands cover the whole workflow: schema generation and dataset
tagging (generate, tag), lattice building (enumerate, bench), per-model
analysis (analyze, overlap), unseen-slice prediction (predict), repair
data selection (select), and the explorer service (serve).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .analyze import (
    ErrorSliceReport,
    attach_model,
    identify_error_slices,
    postprocess,
    slice_overlap,
)
from .generate import (
    GenerationConfig,
    GenerationSession,
    assign_tags,
    determine_tags,
    generate_attributes_comparative,
    generate_attributes_task,
    refine_tags_from_data,
)
from .lattice import (
    EnumConfig,
    SliceLattice,
    enumerate_efficient,
    enumerate_naive,
    enumerate_tree,
)
from .llm import HTTPLLMClient, StubLLMClient
from .predict import (
    HashEmbedding,
    TableEmbedding,
    evaluate_predicted,
    instruct_predict,
    substitute_tags,
)
from .repair import prioritize_groups, prioritize_pool
from .schema import build_index, load_dataset, load_schema
from .service import Workspace, serve
from .synth import oracle_llm_responder, pose_reference_schema, with_performance


class CliError(RuntimeError):
    pass


def _client(args):
    if args.client == "http":
        if not args.url:
            raise CliError("--client http requires --url")
        return HTTPLLMClient(args.url)
    world = pose_reference_schema()
    return StubLLMClient(responder=oracle_llm_responder(world, seed=getattr(args, "seed", 0)))


def _load_schema_file(path: str):
    return load_schema(Path(path).read_bytes())


def _load_dataset_file(schema, path: str):
    return load_dataset(schema, Path(path).read_bytes())


def _apply_scores(dataset, scores_path: str, model_id_default: str):
    doc = json.loads(Path(scores_path).read_text())
    scores = doc["scores"]
    missing = [s.id for s in dataset.samples if s.id not in scores]
    if missing:
        raise CliError(f"scores file lacks {len(missing)} sample id(s), first: {missing[0]!r}")
    perf = np.array([float(scores[s.id]) for s in dataset.samples])
    return with_performance(dataset, perf), str(doc.get("model_id", model_id_default))


def cmd_generate(args) -> int:
    client = _client(args)
    classes = [c.strip() for c in args.classes.split(",") if c.strip()]
    session = GenerationSession(
        task=args.task,
        main_classes=classes,
        config=GenerationConfig(pairs_per_class=args.pairs, review_subset=args.review_subset),
    )
    refs = _image_refs(args)
    pairs = [(refs[i], refs[(i + 1) % len(refs)]) for i in range(min(args.pairs, len(refs)))]
    generate_attributes_comparative(session, client, pairs)
    generate_attributes_task(session, client)
    determine_tags(session, client)
    schema = refine_tags_from_data(session, client, refs[: args.review_subset])
    Path(args.out).write_text(schema.dumps())
    if args.transcript:
        Path(args.transcript).write_text(json.dumps(session.transcript(), indent=2))
    print(f"schema with {len(schema.attributes)} attributes -> {args.out}")
    if session.flags:
        print(f"{len(session.flags)} flag(s); first: {session.flags[0]}", file=sys.stderr)
    return 0


def _image_refs(args) -> list[str]:
    if args.images and Path(args.images).is_dir():
        refs = sorted(p.name for p in Path(args.images).iterdir() if p.is_file())
        if refs:
            return refs
    return [f"img_{i:05d}" for i in range(args.count)]


def cmd_tag(args) -> int:
    schema = _load_schema_file(args.schema)
    client = _client(args)
    refs = _image_refs(args)
    result = assign_tags(
        schema,
        client,
        refs,
        parallelism=args.threads,
        checkpoint_path=args.checkpoint,
        main_class=args.classes.split(",")[0].strip() if args.classes else "",
    )
    Path(args.out).write_text(result.dataset.dumps())
    print(f"tagged {len(result.dataset)} sample(s) -> {args.out}")
    if result.quarantined:
        print(f"quarantined {len(result.quarantined)} sample(s):", file=sys.stderr)
        for ref, reason in result.quarantined[:10]:
            print(f"  {ref}: {reason}", file=sys.stderr)
    return 0


def cmd_enumerate(args) -> int:
    schema = _load_schema_file(args.schema)
    dataset = _load_dataset_file(schema, args.dataset)
    index = build_index(dataset)
    cfg = EnumConfig(
        max_depth=args.depth,
        min_count=args.min_count,
        naive_cap=args.cap,
        threads=args.threads,
    )
    if args.algo == "efficient":
        lattice = enumerate_efficient(index, cfg)
    else:
        fn = enumerate_naive if args.algo == "naive" else enumerate_tree
        slices = fn(index, cfg)
        by_depth: dict[int, list] = {}
        for s in slices.values():
            by_depth.setdefault(s.depth, []).append(s)
        layers = [by_depth.get(d, []) for d in range(1, cfg.max_depth + 1)]
        lattice = SliceLattice(n_samples=len(dataset), config=cfg, layers=layers)
    Path(args.out).write_text(lattice.dumps())
    print(f"{len(lattice)} slice(s) at depth<={args.depth}, min_count={args.min_count} -> {args.out}")
    if lattice.stats:
        for layer in lattice.stats.layers:
            print(
                f"  depth {layer.depth}: {layer.candidates} candidate(s), "
                f"{layer.survivors} survivor(s), {layer.seconds:.3f}s"
            )
    return 0


def cmd_analyze(args) -> int:
    schema = _load_schema_file(args.schema)
    dataset = _load_dataset_file(schema, args.dataset)
    lattice = SliceLattice.loads(Path(args.lattice).read_text())
    model_id = args.model_id
    if args.perf:
        dataset, model_id = _apply_scores(dataset, args.perf, args.model_id)
    view = postprocess(attach_model(lattice, dataset, model_id))
    report = identify_error_slices(view, args.C)
    Path(args.out).write_text(report.dumps())
    print(
        f"model {report.model_id}: overall {report.overall_perf:.4f}, "
        f"{len(report.error_slices)} error slice(s) at C={args.C} -> {args.out}"
    )
    return 0


def cmd_overlap(args) -> int:
    a = ErrorSliceReport.loads(Path(args.a).read_text())
    b = ErrorSliceReport.loads(Path(args.b).read_text())
    value = slice_overlap(a, b, fraction=args.fraction, symmetric=args.symmetric)
    print(json.dumps({
        "a": a.model_id, "b": b.model_id,
        "fraction": args.fraction, "symmetric": args.symmetric,
        "overlap": value,
    }))
    return 0


def cmd_predict(args) -> int:
    schema = _load_schema_file(args.schema)
    if args.mode == "substitute":
        if not args.report:
            raise CliError("--mode substitute requires --report")
        report = ErrorSliceReport.loads(Path(args.report).read_text())
        if args.embedder_table:
            provider = TableEmbedding(json.loads(Path(args.embedder_table).read_text()))
        else:
            provider = HashEmbedding()
        predicted = substitute_tags(report, schema, provider, top_k=args.top_k, metric=args.metric)
    else:
        client = _client(args)
        predicted = instruct_predict(
            schema,
            client,
            pair_count=args.pair_count,
            main_class=args.classes.split(",")[0].strip() if args.classes else "",
            confusion_class=(args.classes.split(",")[1].strip()
                             if args.classes and "," in args.classes else None),
        )
    doc = {
        "version": "1",
        "kind": "predicted-slices",
        "mode": args.mode,
        "slices": [
            {
                "key": [list(p) for p in s.pairs],
                "source": s.source,
                "origin": None if s.origin is None else [list(p) for p in s.origin],
            }
            for s in predicted
        ],
    }
    if args.dataset:
        dataset = _load_dataset_file(schema, args.dataset)
        if args.perf:
            dataset, _ = _apply_scores(dataset, args.perf, "model")
        table = evaluate_predicted(predicted, dataset, min_count=args.min_count)
        doc["degradation"] = table.to_document()
        print(
            f"{len(predicted)} predicted slice(s); {len(table.rows)} matched, "
            f"mean degradation {table.mean_degradation:+.4f}"
        )
    else:
        print(f"{len(predicted)} predicted slice(s)")
    Path(args.out).write_text(json.dumps(doc, indent=2, ensure_ascii=False))
    return 0


def cmd_select(args) -> int:
    schema = _load_schema_file(args.schema)
    pool = _load_dataset_file(schema, args.pool)
    report = ErrorSliceReport.loads(Path(args.report).read_text())
    if args.marks:
        marks_doc = json.loads(Path(args.marks).read_text())
        marked = [tuple(sorted((str(a), str(t)) for a, t in k)) for k in marks_doc["marks"]]
        by_key = {e.key: e for e in report.error_slices}
        pinned = [by_key[k] for k in marked if k in by_key]
        rest = [e for e in report.error_slices if e.key not in set(marked)]
        report.error_slices = pinned + rest
    plan = (
        prioritize_groups(report, pool, args.budget)
        if args.group
        else prioritize_pool(report, pool, args.budget)
    )
    Path(args.out).write_text(plan.dumps())
    print(f"selected {len(plan.selections)} {'group' if args.group else 'sample'}(s) -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    root = args.workspace or os.environ.get("SLICESCOPE_WORKSPACE")
    if not root:
        raise CliError("provide --workspace or set SLICESCOPE_WORKSPACE")
    bind = args.bind or os.environ.get("SLICESCOPE_BIND", "127.0.0.1:8765")
    host, _, port = bind.partition(":")
    workspace = Workspace(root, threshold_gap=args.C)
    server = serve(workspace, host=host, port=int(port or 8765), static_dir=args.static)
    print(f"serving workspace {root} on http://{host}:{port or 8765}{'' if not args.static else f' (static: {args.static})'}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_bench(args) -> int:
    algorithms = ("naive", "tree", "efficient") if args.algo == "all" else (args.algo,)
    result = bench_mod.run_benchmark(
        depth=args.depth,
        min_count=args.min_count,
        n_samples=args.n,
        seed=args.seed,
        algorithms=algorithms,
    )
    print(result.table())
    if args.scaling:
        print("\nscaling (efficient):")
        rows = bench_mod.run_scaling(depth=args.depth, min_count=args.min_count, seed=args.seed)
        for n, seconds, slices in rows:
            print(f"  N={n:>6}: {seconds:.3f}s, {slices} slice(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicescope")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an attribute/tag schema")
    p.add_argument("--task", default="classification",
                   choices=["classification", "pose_estimation", "object_detection", "other"])
    p.add_argument("--classes", default="object", help="comma-separated; first is the main class")
    p.add_argument("--images", default=None, help="directory of image files (names become refs)")
    p.add_argument("--count", type=int, default=40, help="synthetic ref count when no --images")
    p.add_argument("--client", default="stub", choices=["stub", "http"])
    p.add_argument("--url", default=None, help="completion endpoint for --client http")
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--review-subset", type=int, default=100)
    p.add_argument("--transcript", default=None, help="write the audit transcript here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("tag", help="assign tags to a dataset")
    p.add_argument("--schema", required=True)
    p.add_argument("--images", default=None)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--classes", default="object")
    p.add_argument("--client", default="stub", choices=["stub", "http"])
    p.add_argument("--url", default=None)
    p.add_argument("--threads", type=int, default=8)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tag)

    p = sub.add_parser("enumerate", help="enumerate the slice lattice")
    p.add_argument("--schema", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--algo", default="efficient", choices=["naive", "tree", "efficient"])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cap", type=int, default=100_000_000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_enumerate)

    p = sub.add_parser("analyze", help="rank a model's error slices")
    p.add_argument("--schema", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--lattice", required=True)
    p.add_argument("--perf", default=None, help="model scores file {model_id, scores:{id: value}}")
    p.add_argument("--model-id", default="model")
    p.add_argument("--C", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("overlap", help="top-fraction overlap of two reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--symmetric", action="store_true")
    p.set_defaults(fn=cmd_overlap)

    p = sub.add_parser("predict", help="predict unseen error slices")
    p.add_argument("--mode", required=True, choices=["substitute", "instruct"])
    p.add_argument("--schema", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "cosine"])
    p.add_argument("--embedder-table", default=None, help="JSON file {text: [vector]}")
    p.add_argument("--client", default="stub", choices=["stub", "http"])
    p.add_argument("--url", default=None)
    p.add_argument("--classes", default="object")
    p.add_argument("--pair-count", type=int, default=3)
    p.add_argument("--dataset", default=None, help="evaluate degradation on this dataset")
    p.add_argument("--perf", default=None)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("select", help="build a repair data-selection plan")
    p.add_argument("--schema", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--group", action="store_true", help="select whole groups (images)")
    p.add_argument("--marks", default=None, help="marks manifest pinning slices to the top")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_select)

    p = sub.add_parser("serve", help="serve a workspace over HTTP")
    p.add_argument("--workspace", default=None)
    p.add_argument("--bind", default=None, help="host:port (default 127.0.0.1:8765)")
    p.add_argument("--C", type=float, default=0.2)
    p.add_argument("--static", default=None, help="directory of UI assets to serve")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("bench", help="enumeration benchmark on the reference corpus")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--n", type=int, default=7000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--algo", default="all", choices=["all", "naive", "tree", "efficient"])
    p.add_argument("--scaling", action="store_true")
    p.set_defaults(fn=cmd_bench)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
