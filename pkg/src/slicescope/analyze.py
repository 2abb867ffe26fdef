"""Per-model slice analysis: averages, post-processing, error-slice ranking.

The lattice is built once per dataset; everything here is per model.
Attaching a model computes each slice's mean performance from the
model's per-sample scores.  Post-processing then drops slices whose
average exceeds every generating context: a slice is informative only if
its extra tag makes things worse than each of its parents.  Error slices
are the retained slices at least C below the model's overall mean,
ranked worst first.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from . import bitvec
from .lattice import SliceKey, SliceLattice, key_to_string
from .schema import TaggedDataset

REPORT_FORMAT_VERSION = "1"


def lattice_fingerprint(lattice: SliceLattice) -> str:
    """Stable digest of the slice universe (keys and counts)."""
    h = hashlib.sha256()
    h.update(f"{lattice.n_samples}:{lattice.config.max_depth}:{lattice.config.min_count}".encode())
    for s in lattice.all_slices():
        h.update(key_to_string(s.pairs).encode())
        h.update(str(s.count).encode())
    return h.hexdigest()[:16]


@dataclass
class ModelSliceView:
    """One model's performance laid over a shared lattice."""

    lattice: SliceLattice
    model_id: str
    avg_perf: dict[SliceKey, float]
    overall_perf: float
    retained: dict[SliceKey, bool]
    postprocessed: bool = False

    def retained_keys(self) -> list[SliceKey]:
        return [k for k, v in self.retained.items() if v]


def attach_model(
    lattice: SliceLattice, dataset: TaggedDataset, model_id: str = "model"
) -> ModelSliceView:
    """Compute per-slice and overall mean performance for one model.

    The dataset must be the one the lattice was enumerated from (same
    sample order); its performance column carries this model's scores.
    Averages are snapped to 12 decimals: slices whose members score
    identically must tie exactly, so the ranking's count tie-break works
    instead of float summation noise.
    """
    if len(dataset) != lattice.n_samples:
        raise ValueError(
            f"dataset has {len(dataset)} samples but lattice was built over "
            f"{lattice.n_samples}"
        )
    perf = dataset.require_performance()
    avg: dict[SliceKey, float] = {}
    for s in lattice.all_slices():
        idx = bitvec.indices(s.members, lattice.n_samples)
        avg[s.pairs] = round(float(perf[idx].mean()), 12)
    return ModelSliceView(
        lattice=lattice,
        model_id=model_id,
        avg_perf=avg,
        overall_perf=round(float(perf.mean()), 12),
        retained={s.pairs: True for s in lattice.all_slices()},
    )


def postprocess(view: ModelSliceView) -> ModelSliceView:
    """Drop slices that do not underperform every parent.

    A depth-k slice (k >= 2) is retained iff its average is <= the
    minimum of its parents' averages; depth-1 slices are always
    retained.  Each slice is judged against its original-lattice
    parents, so removal never cascades and the operation is idempotent.
    """
    retained: dict[SliceKey, bool] = {}
    for s in view.lattice.all_slices():
        parents = view.lattice.parents(s.pairs)
        if not parents:
            retained[s.pairs] = True
        else:
            retained[s.pairs] = view.avg_perf[s.pairs] <= min(
                view.avg_perf[p] for p in parents
            )
    return replace(view, retained=retained, postprocessed=True)


@dataclass
class ErrorSliceEntry:
    key: SliceKey
    count: int
    avg_perf: float
    parents: tuple[SliceKey, ...]


@dataclass
class ErrorSliceReport:
    """Ranked error slices for one model."""

    model_id: str
    threshold_gap: float  # the constant C
    overall_perf: float
    error_slices: list[ErrorSliceEntry]
    fingerprint: str = ""

    def keys(self) -> list[SliceKey]:
        return [e.key for e in self.error_slices]

    def to_document(self) -> dict:
        return {
            "version": REPORT_FORMAT_VERSION,
            "kind": "error-slice-report",
            "model_id": self.model_id,
            "C": self.threshold_gap,
            "overall_perf": self.overall_perf,
            "lattice_fingerprint": self.fingerprint,
            "error_slices": [
                {
                    "key": [list(p) for p in e.key],
                    "count": e.count,
                    "avg_perf": e.avg_perf,
                    "parents": [[list(q) for q in p] for p in e.parents],
                }
                for e in self.error_slices
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False)

    @classmethod
    def from_document(cls, doc: dict) -> "ErrorSliceReport":
        entries = []
        for rec in doc["error_slices"]:
            entries.append(
                ErrorSliceEntry(
                    key=tuple(sorted((str(a), str(t)) for a, t in rec["key"])),
                    count=int(rec["count"]),
                    avg_perf=float(rec["avg_perf"]),
                    parents=tuple(
                        tuple(sorted((str(a), str(t)) for a, t in p)) for p in rec["parents"]
                    ),
                )
            )
        return cls(
            model_id=str(doc["model_id"]),
            threshold_gap=float(doc["C"]),
            overall_perf=float(doc["overall_perf"]),
            error_slices=entries,
            fingerprint=str(doc.get("lattice_fingerprint", "")),
        )

    @classmethod
    def loads(cls, text: str) -> "ErrorSliceReport":
        return cls.from_document(json.loads(text))


def identify_error_slices(view: ModelSliceView, threshold_gap: float = 0.2) -> ErrorSliceReport:
    """Rank retained slices at least ``threshold_gap`` below the overall mean.

    Ordering is ascending average performance, ties broken by descending
    count then lexicographic key, so the ranking is a total order.  Ties
    at exactly overall - gap are included.
    """
    if not (0.0 < threshold_gap < 1.0):
        raise ValueError(f"threshold gap must lie in (0, 1), got {threshold_gap}")
    if not view.postprocessed:
        view = postprocess(view)
    cutoff = view.overall_perf - threshold_gap
    entries: list[ErrorSliceEntry] = []
    for s in view.lattice.all_slices():
        if not view.retained[s.pairs]:
            continue
        avg = view.avg_perf[s.pairs]
        if avg <= cutoff:
            entries.append(
                ErrorSliceEntry(
                    key=s.pairs,
                    count=s.count,
                    avg_perf=avg,
                    parents=view.lattice.parents(s.pairs),
                )
            )
    entries.sort(key=lambda e: (e.avg_perf, -e.count, e.key))
    return ErrorSliceReport(
        model_id=view.model_id,
        threshold_gap=threshold_gap,
        overall_perf=view.overall_perf,
        error_slices=entries,
        fingerprint=lattice_fingerprint(view.lattice),
    )


def slice_overlap(
    a: ErrorSliceReport,
    b: ErrorSliceReport,
    fraction: float = 0.1,
    symmetric: bool = False,
) -> float:
    """Overlap of the two reports' worst slices.

    Takes the lowest-performance ``fraction`` of each report's ranked
    list (at least one slice when the list is non-empty) and returns
    |top(a) & top(b)| / |top(a)|; the symmetric variant averages the two
    directions.  Slices are compared by canonical key: both reports must
    come from the same lattice.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if a.fingerprint and b.fingerprint and a.fingerprint != b.fingerprint:
        raise ValueError("reports were built on different lattices")
    top_a = _top_keys(a, fraction)
    top_b = _top_keys(b, fraction)
    forward = _directed_overlap(top_a, top_b)
    if not symmetric:
        return forward
    return (forward + _directed_overlap(top_b, top_a)) / 2.0


def _top_keys(report: ErrorSliceReport, fraction: float) -> set[SliceKey]:
    n = len(report.error_slices)
    if n == 0:
        return set()
    take = max(1, math.ceil(fraction * n))
    return {e.key for e in report.error_slices[:take]}


def _directed_overlap(top_a: set[SliceKey], top_b: set[SliceKey]) -> float:
    if not top_a:
        return 1.0 if not top_b else 0.0
    return len(top_a & top_b) / len(top_a)
