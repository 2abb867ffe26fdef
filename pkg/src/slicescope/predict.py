"""Predicting error slices beyond the validation set.

Two independent strategies: substituting one tag of a known error slice
with its nearest neighbour in text-embedding space (exploring the
feature-space neighbourhood of identified errors), and asking an
instruction-following model to propose risky attribute-tag combinations
outright (no knowledge of the model under test).  A degradation table
then measures how much worse the model does on predicted slices that
actually occur in a dataset.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from . import prompts
from .analyze import ErrorSliceReport
from .lattice import SliceKey
from .llm import LLMClient, StrictParseError, parse_json_response
from .schema import AttributeSchema, CATEGORY_KEYS, KEY_CATEGORIES, TaggedDataset, canonical

logger = logging.getLogger(__name__)


class EmbeddingProvider(Protocol):
    """Deterministic text → fixed-dimension vector."""

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedding:
    """Deterministic stand-in embedder: seeded Gaussian vector per text.

    Useful when no embedding model is wired in; distances are arbitrary
    but stable across runs and processes.
    """

    def __init__(self, dim: int = 32):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        seed = int.from_bytes(text.encode("utf-8").ljust(8, b"\0")[:8], "little")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self.dim)


class TableEmbedding:
    """Embeddings from an explicit text → vector table (tests, replays)."""

    def __init__(self, table: dict[str, Sequence[float]]):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}

    def embed(self, text: str) -> np.ndarray:
        return self.table[text]


class PredictionError(RuntimeError):
    """No valid predicted slices could be obtained."""


@dataclass(frozen=True)
class PredictedSlice:
    pairs: SliceKey
    source: str  # "tag_substitution" | "instruction"
    origin: Optional[SliceKey] = None
    replaced: Optional[tuple[str, str]] = None
    model_id: Optional[str] = None
    prompt_version: Optional[str] = None


def _distance(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    if metric == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 1.0
        return float(1.0 - np.dot(a, b) / (na * nb))
    raise ValueError(f"unknown metric {metric!r}")


def nearest_tag(
    schema: AttributeSchema,
    provider: EmbeddingProvider,
    attribute: str,
    tag: str,
    metric: str = "euclidean",
) -> Optional[str]:
    """The other tag of ``attribute`` closest to ``tag`` in embedding space.

    Ties break lexicographically on the tag string, so the result does
    not depend on tag enumeration order.  None when the attribute has no
    alternative tag.
    """
    attr = schema.attribute(attribute)
    others = [t for t in attr.tags if t != tag]
    if not others:
        return None
    ref = provider.embed(tag)
    return min(others, key=lambda t: (_distance(provider.embed(t), ref, metric), t))


def substitute_tags(
    report: ErrorSliceReport,
    schema: AttributeSchema,
    provider: EmbeddingProvider,
    top_k: int = 20,
    metric: str = "euclidean",
) -> list[PredictedSlice]:
    """Predict unseen slices by one-pair nearest-neighbour substitution.

    For each of the top_k worst slices and each of its pairs, the tag is
    replaced by its nearest neighbour within the same attribute.  Slices
    already present in the source report and duplicate predictions are
    dropped; each output differs from its origin in exactly one pair.
    """
    known = {e.key for e in report.error_slices}
    seen: set[SliceKey] = set()
    out: list[PredictedSlice] = []
    for entry in report.error_slices[:top_k]:
        for attribute, tag in entry.key:
            replacement = nearest_tag(schema, provider, attribute, tag, metric)
            if replacement is None:
                continue
            pairs = tuple(sorted(
                (a, replacement if a == attribute else t) for a, t in entry.key
            ))
            if pairs in known or pairs in seen:
                continue
            seen.add(pairs)
            out.append(
                PredictedSlice(
                    pairs=pairs,
                    source="tag_substitution",
                    origin=entry.key,
                    replaced=(attribute, tag),
                )
            )
    return out


def _prompt_for_task(task: str) -> str:
    if task == "classification":
        return "predict_slices_classification"
    return "predict_slices_localization"


def instruct_predict(
    schema: AttributeSchema,
    llm: LLMClient,
    pair_count: int = 3,
    main_class: str = "",
    confusion_class: Optional[str] = None,
    task: Optional[str] = None,
    max_retries: int = 2,
) -> list[PredictedSlice]:
    """Ask the model for risky attribute-tag combinations.

    Combinations are validated against the schema: every attribute must
    exist, every tag must be in vocabulary, at most one tag per
    attribute, and exactly ``pair_count`` pairs in total.  Invalid
    combinations are dropped with a logged reason; a wholly invalid
    response is retried with the failure appended, up to
    ``max_retries`` extra attempts.
    """
    task = task or schema.task
    prompt_name = _prompt_for_task(task)
    system = prompts.load(prompt_name)
    form = {k: v for k, v in schema.to_document().items() if k in KEY_CATEGORIES}
    payload_doc = {
        "main object class": main_class,
        "attributes and tags": form,
        "number of attribute-tag pairs": pair_count,
    }
    if task == "classification":
        payload_doc["target class for confusion"] = confusion_class or ""
    else:
        payload_doc["task"] = task
    payload = json.dumps(payload_doc, ensure_ascii=False)

    failure = ""
    for attempt in range(max_retries + 1):
        request = payload if not failure else payload + "\n\nYour previous output was invalid: " + failure
        response = llm.complete(system, request)
        try:
            slices = _parse_predictions(schema, response, pair_count)
        except StrictParseError as exc:
            failure = str(exc)
            logger.warning("prediction response unparseable (attempt %d): %s", attempt + 1, exc)
            continue
        if slices:
            out = []
            seen: set[SliceKey] = set()
            for pairs in slices:
                if pairs in seen:
                    continue
                seen.add(pairs)
                out.append(
                    PredictedSlice(
                        pairs=pairs,
                        source="instruction",
                        prompt_version=prompts.version(prompt_name),
                    )
                )
            return out
        failure = "no combination satisfied the schema and pair-count rules"
        logger.warning("prediction response had zero valid combinations (attempt %d)", attempt + 1)
    raise PredictionError(
        f"no valid predicted slices after {max_retries + 1} attempts: {failure}"
    )


def _parse_predictions(
    schema: AttributeSchema, response: str, pair_count: int
) -> list[SliceKey]:
    doc = parse_json_response(response)
    if not isinstance(doc, dict) or not isinstance(doc.get("predictions"), list):
        raise StrictParseError("expected an object with a 'predictions' list")
    valid: list[SliceKey] = []
    for combo in doc["predictions"]:
        pairs = _validate_combo(schema, combo, pair_count)
        if pairs is not None:
            valid.append(pairs)
    return valid


def _validate_combo(schema: AttributeSchema, combo, pair_count: int) -> Optional[SliceKey]:
    if not isinstance(combo, dict):
        logger.info("dropped combination: not an object")
        return None
    pairs: dict[str, str] = {}
    for category, assignments in combo.items():
        if not isinstance(assignments, dict):
            logger.info("dropped combination: category %r is not an object", category)
            return None
        for raw_attr, raw_tag in assignments.items():
            attr_name = canonical(str(raw_attr))
            tag = canonical(str(raw_tag))
            try:
                attr = schema.attribute(attr_name)
            except KeyError:
                logger.info("dropped combination: unknown attribute %r", attr_name)
                return None
            if tag not in attr.tags:
                logger.info("dropped combination: tag %r not in vocabulary of %r", tag, attr_name)
                return None
            if attr_name in pairs:
                logger.info("dropped combination: attribute %r assigned twice", attr_name)
                return None
            if category in KEY_CATEGORIES and KEY_CATEGORIES[category] != attr.category:
                logger.info(
                    "combination places %r under %r; schema says %r (accepted)",
                    attr_name, category, CATEGORY_KEYS[attr.category],
                )
            pairs[attr_name] = tag
    if len(pairs) != pair_count:
        logger.info(
            "dropped combination: %d pairs, required exactly %d", len(pairs), pair_count
        )
        return None
    return tuple(sorted(pairs.items()))


@dataclass
class DegradationRow:
    pairs: SliceKey
    source: str
    count: int
    avg_perf: float
    degradation: float  # avg_perf - overall_perf


@dataclass
class DegradationTable:
    overall_perf: float
    rows: list[DegradationRow] = field(default_factory=list)
    unmatched: list[PredictedSlice] = field(default_factory=list)

    @property
    def mean_degradation(self) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean([r.degradation for r in self.rows]))

    def to_document(self) -> dict:
        return {
            "version": "1",
            "kind": "degradation-table",
            "overall_perf": self.overall_perf,
            "mean_degradation": self.mean_degradation,
            "rows": [
                {
                    "key": [list(p) for p in r.pairs],
                    "source": r.source,
                    "count": r.count,
                    "avg_perf": r.avg_perf,
                    "degradation": r.degradation,
                }
                for r in self.rows
            ],
            "unmatched": [[list(p) for p in u.pairs] for u in self.unmatched],
        }


def evaluate_predicted(
    predicted: Sequence[PredictedSlice],
    dataset: TaggedDataset,
    min_count: int = 1,
) -> DegradationTable:
    """Measure the model on predicted slices that occur in the dataset.

    Each predicted slice with at least ``min_count`` matching samples
    gets a row with its count, average performance, and degradation
    relative to the overall mean; the rest are listed as unmatched.
    """
    perf = dataset.require_performance()
    overall = float(perf.mean())
    table = DegradationTable(overall_perf=overall)
    for pred in predicted:
        mask = np.ones(len(dataset), dtype=bool)
        for attribute, tag in pred.pairs:
            j = dataset.schema.index_of(attribute)
            code = dataset.schema.attributes[j].tag_code(tag)
            mask &= dataset.codes[:, j] == code
        count = int(np.count_nonzero(mask))
        if count >= min_count:
            avg = float(perf[mask].mean())
            table.rows.append(
                DegradationRow(
                    pairs=pred.pairs,
                    source=pred.source,
                    count=count,
                    avg_perf=avg,
                    degradation=avg - overall,
                )
            )
        else:
            table.unmatched.append(pred)
    table.rows.sort(key=lambda r: (r.degradation, r.pairs))
    return table
