"""Attribute/tag universe and tagged datasets.

An attribute is a named visual characteristic with a finite tag
vocabulary, categorized as describing the main object, the background,
or the whole image.  A tagged dataset assigns exactly one tag per
attribute to every sample, together with an optional per-sample
performance score in [0, 1] and an optional group key (for object-level
tasks where several samples share one image).

Schema documents are JSON with top-level category keys; datasets are
newline-delimited JSON records preceded by a header line carrying the
format version.  Tag and attribute comparisons are exact, case-sensitive
string matches after Unicode NFC normalization and whitespace trimming.
"""

from __future__ import annotations

import io
import json
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import bitvec

MAIN_OBJECT = "main_object"
BACKGROUND = "background"
GLOBAL = "global"
CATEGORIES = (MAIN_OBJECT, BACKGROUND, GLOBAL)

# External documents use the human-facing category spellings.
CATEGORY_KEYS = {MAIN_OBJECT: "main object", BACKGROUND: "background", GLOBAL: "global"}
KEY_CATEGORIES = {v: k for k, v in CATEGORY_KEYS.items()}

TASKS = ("classification", "pose_estimation", "object_detection", "other")

BINARY_PREFIX = "is "
BINARY_TAGS = ("yes", "no")
NOT_VISIBLE = "not visible"

SCHEMA_FORMAT_VERSION = "1"
DATASET_FORMAT_VERSION = "1"


class SchemaError(ValueError):
    """A schema document violates an invariant."""


class DatasetError(ValueError):
    """A dataset record violates the schema or the record format."""


def canonical(text: str) -> str:
    """NFC-normalize and trim; the only canonicalization applied to names/tags."""
    return unicodedata.normalize("NFC", text).strip()


@dataclass(frozen=True)
class Attribute:
    name: str
    category: str
    tags: tuple[str, ...]
    binary: bool

    def tag_code(self, tag: str) -> int:
        return self.tags.index(tag)


@dataclass(frozen=True)
class AttributeSchema:
    """The attribute universe: an ordered list of attributes with tag sets."""

    attributes: tuple[Attribute, ...]
    task: str = "other"
    version: str = SCHEMA_FORMAT_VERSION

    def __post_init__(self):
        _validate_schema(self)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise KeyError(name)

    def by_category(self, category: str) -> tuple[Attribute, ...]:
        return tuple(a for a in self.attributes if a.category == category)

    def to_document(self) -> dict:
        doc: dict = {"version": self.version, "task": self.task}
        for cat in CATEGORIES:
            doc[CATEGORY_KEYS[cat]] = {a.name: list(a.tags) for a in self.by_category(cat)}
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False)


def _is_binary_tagset(tags: Iterable[str]) -> bool:
    return set(tags) <= {*BINARY_TAGS, NOT_VISIBLE}


def make_attribute(name: str, category: str, tags: Iterable[str]) -> Attribute:
    name = canonical(name)
    tags = tuple(canonical(t) for t in tags)
    binary = name.startswith(BINARY_PREFIX)
    return Attribute(name=name, category=category, tags=tags, binary=binary)


def _validate_schema(schema: AttributeSchema) -> None:
    if schema.task not in TASKS:
        raise SchemaError(f"unknown task {schema.task!r}; expected one of {TASKS}")
    seen: set[str] = set()
    for attr in schema.attributes:
        if attr.category not in CATEGORIES:
            raise SchemaError(f"attribute {attr.name!r}: unknown category {attr.category!r}")
        if attr.name in seen:
            raise SchemaError(f"duplicate attribute name {attr.name!r}")
        seen.add(attr.name)
        if len(attr.tags) < 2:
            raise SchemaError(f"attribute {attr.name!r} needs >=2 tags, has {len(attr.tags)}")
        if len(set(attr.tags)) != len(attr.tags):
            raise SchemaError(f"attribute {attr.name!r} has duplicate tags")
        starts_is = attr.name.startswith(BINARY_PREFIX)
        if starts_is and not _is_binary_tagset(attr.tags):
            raise SchemaError(
                f"binary attribute {attr.name!r} with non-binary tags {list(attr.tags)}"
            )
        if attr.binary != starts_is:
            raise SchemaError(f"attribute {attr.name!r}: binary flag inconsistent with name")


def load_schema(source) -> AttributeSchema:
    """Parse and validate a schema document.

    Accepts bytes, JSON text, or a readable file object.  The document
    carries the three category keys, each mapping attribute name to its
    tag list, plus "version" and optionally "task".
    """
    raw = _read_source(source)
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("schema document must be a JSON object")
    attributes: list[Attribute] = []
    for cat in CATEGORIES:
        section = doc.get(CATEGORY_KEYS[cat], {})
        if not isinstance(section, dict):
            raise SchemaError(f"category {CATEGORY_KEYS[cat]!r} must map attributes to tag lists")
        for name, tags in section.items():
            if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
                raise SchemaError(f"attribute {name!r}: tags must be a list of strings")
            attributes.append(make_attribute(name, cat, tags))
    return AttributeSchema(
        attributes=tuple(attributes),
        task=doc.get("task", "other"),
        version=str(doc.get("version", SCHEMA_FORMAT_VERSION)),
    )


@dataclass
class ValidationReport:
    """Outcome of checking one tag assignment against a schema."""

    missing: list[str] = field(default_factory=list)
    unknown: list[str] = field(default_factory=list)
    out_of_vocabulary: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.unknown or self.out_of_vocabulary)

    def describe(self) -> str:
        parts = []
        if self.missing:
            parts.append("missing attributes: " + ", ".join(self.missing))
        if self.unknown:
            parts.append("unknown attributes: " + ", ".join(self.unknown))
        if self.out_of_vocabulary:
            parts.append(
                "out-of-vocabulary tags: "
                + ", ".join(f"{a}={t!r}" for a, t in self.out_of_vocabulary)
            )
        return "; ".join(parts) if parts else "ok"


def validate_assignment(schema: AttributeSchema, tags: dict[str, str]) -> ValidationReport:
    """Check one attribute→tag map: every attribute present, every tag in vocabulary."""
    report = ValidationReport()
    tags = {canonical(k): canonical(v) for k, v in tags.items()}
    known = set(schema.names)
    for name in tags:
        if name not in known:
            report.unknown.append(name)
    for attr in schema.attributes:
        if attr.name not in tags:
            report.missing.append(attr.name)
        elif tags[attr.name] not in attr.tags:
            report.out_of_vocabulary.append((attr.name, tags[attr.name]))
    return report


@dataclass(frozen=True)
class Sample:
    id: str
    tags: dict[str, str]
    performance: Optional[float] = None
    group: Optional[str] = None


class TaggedDataset:
    """Samples with one tag per schema attribute.

    Tags are stored column-wise as small-integer codes (one column per
    attribute) so that slice membership checks are vectorized.  The
    performance column is optional at load time: tagging pipelines and
    repair pools produce datasets before any model has been scored.
    """

    def __init__(self, schema: AttributeSchema, samples: list[Sample]):
        self.schema = schema
        self.samples = list(samples)
        ids = [s.id for s in self.samples]
        dup = _first_duplicate(ids)
        if dup is not None:
            raise DatasetError(f"duplicate id {dup!r}")
        for s in self.samples:
            report = validate_assignment(schema, s.tags)
            if not report.ok:
                raise DatasetError(f"sample {s.id!r}: {report.describe()}")
            if s.performance is not None and not (0.0 <= s.performance <= 1.0):
                raise DatasetError(
                    f"sample {s.id!r}: performance out of range: {s.performance}"
                )
        n = len(self.samples)
        self.codes = np.empty((n, len(schema.attributes)), dtype=np.int16)
        for j, attr in enumerate(schema.attributes):
            code = {t: c for c, t in enumerate(attr.tags)}
            for i, s in enumerate(self.samples):
                self.codes[i, j] = code[canonical(s.tags[attr.name])]
        self.performance = np.array(
            [np.nan if s.performance is None else s.performance for s in self.samples],
            dtype=np.float64,
        )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    @property
    def has_performance(self) -> bool:
        return len(self.samples) > 0 and not np.isnan(self.performance).any()

    def require_performance(self) -> np.ndarray:
        if np.isnan(self.performance).any():
            missing = [s.id for s in self.samples if s.performance is None]
            raise DatasetError(
                f"{len(missing)} sample(s) lack a performance score (first: {missing[0]!r})"
            )
        return self.performance

    def groups(self) -> dict[str, list[int]]:
        """Group key → sample positions, in first-appearance order."""
        out: dict[str, list[int]] = {}
        for i, s in enumerate(self.samples):
            if s.group is None:
                raise DatasetError(f"sample {s.id!r} has no group key")
            out.setdefault(s.group, []).append(i)
        return out

    def dumps(self) -> str:
        header = json.dumps({"version": DATASET_FORMAT_VERSION, "kind": "tagged-dataset"})
        lines = [header]
        for s in self.samples:
            rec: dict = {"id": s.id, "tags": s.tags}
            if s.performance is not None:
                rec["performance"] = s.performance
            if s.group is not None:
                rec["group"] = s.group
            lines.append(json.dumps(rec, ensure_ascii=False))
        return "\n".join(lines) + "\n"


def _first_duplicate(items: list[str]) -> Optional[str]:
    seen: set[str] = set()
    for x in items:
        if x in seen:
            return x
        seen.add(x)
    return None


def load_dataset(schema: AttributeSchema, source) -> TaggedDataset:
    """Parse newline-delimited records and validate them against the schema.

    The first line may be a header object with a "version" field; every
    other line is one record {id, tags, performance?, group?}.  The first
    offending record aborts the load with its id and violation.
    """
    text = _read_source(source)
    samples: list[Sample] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: invalid JSON: {exc}") from exc
        if lineno == 1 and isinstance(rec, dict) and "id" not in rec:
            continue  # header line
        if not isinstance(rec, dict) or "id" not in rec or "tags" not in rec:
            raise DatasetError(f"line {lineno}: record must carry 'id' and 'tags'")
        perf = rec.get("performance")
        if perf is not None and not isinstance(perf, (int, float)):
            raise DatasetError(f"sample {rec['id']!r}: performance must be a number")
        samples.append(
            Sample(
                id=str(rec["id"]),
                tags={str(k): str(v) for k, v in rec["tags"].items()},
                performance=None if perf is None else float(perf),
                group=None if rec.get("group") is None else str(rec["group"]),
            )
        )
    return TaggedDataset(schema, samples)


class IndicatorIndex:
    """Per-(attribute, tag) membership bit-vectors over sample positions.

    For each attribute the tag bit-vectors partition the sample range:
    every sample sets exactly one bit per attribute.  The raw code matrix
    rides along so that scan-style counting (used by the brute-force and
    tree enumerators) shares one input type with the bit-vector path.
    """

    def __init__(self, schema: AttributeSchema, codes: np.ndarray):
        self.schema = schema
        self.codes = codes
        self.n_samples = codes.shape[0]
        self.bits: list[list[np.ndarray]] = []
        for j, attr in enumerate(schema.attributes):
            col = codes[:, j]
            self.bits.append([bitvec.pack(col == c) for c in range(len(attr.tags))])

    def vector(self, attr_idx: int, tag_idx: int) -> np.ndarray:
        return self.bits[attr_idx][tag_idx]

    def count(self, attr_idx: int, tag_idx: int) -> int:
        return bitvec.popcount(self.bits[attr_idx][tag_idx])


def build_index(dataset: TaggedDataset) -> IndicatorIndex:
    """Build the indicator structures for fast slice counting."""
    return IndicatorIndex(dataset.schema, dataset.codes)


def _read_source(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    raise TypeError(f"cannot read schema/dataset source of type {type(source)!r}")
