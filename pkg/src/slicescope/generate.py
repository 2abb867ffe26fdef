"""Structured attribute/tag generation over an abstract multimodal client.

The pipeline runs in fixed stages: comparative attribute extraction from
image pairs, task-specific error-prone attribute queries with a
self-correction pass, tag determination, data-driven tag refinement, and
finally dataset-wide tag assignment.  Every request/response lands in an
append-only audit log, so a recorded session can be replayed to
reproduce the identical schema.

The client can misbehave arbitrarily (malformed documents, junk tags,
truncated output); whatever happens, an accepted schema always satisfies
the schema invariants, and per-image tagging failures are quarantined
instead of aborting the run.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import prompts
from .llm import LLMClient, StrictParseError, parse_json_response
from .schema import (
    AttributeSchema,
    BINARY_PREFIX,
    BINARY_TAGS,
    CATEGORIES,
    CATEGORY_KEYS,
    KEY_CATEGORIES,
    NOT_VISIBLE,
    Sample,
    TaggedDataset,
    canonical,
    make_attribute,
    validate_assignment,
)

logger = logging.getLogger(__name__)


class GenerationError(RuntimeError):
    """A pipeline stage could not produce a usable result."""


@dataclass
class GenerationConfig:
    pairs_per_class: int = 20
    review_subset: int = 100
    retries: int = 2


@dataclass
class GenerationSession:
    """Mutable state of one generation run: draft schema plus audit log."""

    task: str
    main_classes: list[str]
    config: GenerationConfig = field(default_factory=GenerationConfig)
    # category → attribute name → tag list (None until tags determined)
    draft: dict[str, dict[str, Optional[list[str]]]] = field(
        default_factory=lambda: {c: {} for c in CATEGORIES}
    )
    audit: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def main_class(self) -> str:
        return self.main_classes[0] if self.main_classes else ""

    def attribute_names(self) -> dict[str, str]:
        """name → category for every draft attribute."""
        return {name: cat for cat in CATEGORIES for name in self.draft[cat]}

    def names_form(self) -> dict:
        return {CATEGORY_KEYS[c]: list(self.draft[c].keys()) for c in CATEGORIES}

    def tags_form(self) -> dict:
        return {
            CATEGORY_KEYS[c]: {a: list(ts) if ts else [] for a, ts in self.draft[c].items()}
            for c in CATEGORIES
        }

    def transcript(self) -> list[dict]:
        """The audit log in the shape ReplayLLMClient consumes."""
        return [
            {
                "system": rec["system"],
                "payload": rec["payload"],
                "images": rec["images"],
                "response": rec["response"],
            }
            for rec in self.audit
        ]


def _complete_logged(
    session: GenerationSession,
    llm: LLMClient,
    stage: str,
    system: str,
    payload: str,
    images: Optional[Sequence[str]] = None,
):
    """One strict-parsed request with repair re-prompts, fully audited.

    On a parse failure the request is repeated with the parse error
    appended, up to the configured retry limit; the caller sees either a
    parsed document or GenerationError.
    """
    failure = ""
    for _ in range(session.config.retries + 1):
        sent = payload if not failure else payload + "\n\nYour previous output was invalid: " + failure
        response = llm.complete(system, sent, images=images)
        session.audit.append(
            {
                "stage": stage,
                "system": system,
                "payload": sent,
                "images": list(images) if images else [],
                "response": response,
            }
        )
        try:
            return parse_json_response(response)
        except StrictParseError as exc:
            failure = str(exc)
            logger.warning("%s: unparseable response, re-prompting: %s", stage, exc)
    raise GenerationError(f"{stage}: unparseable response after retries: {failure}")


def _merge_attribute_names(session: GenerationSession, doc, stage: str) -> int:
    """Merge a {category: [names]} response into the draft; returns adds."""
    if not isinstance(doc, dict):
        raise GenerationError(f"{stage}: expected an object with category keys")
    existing = session.attribute_names()
    added = 0
    for key, names in doc.items():
        if key not in KEY_CATEGORIES:
            session.flags.append(f"{stage}: ignored unknown category {key!r}")
            continue
        cat = KEY_CATEGORIES[key]
        if not isinstance(names, list):
            session.flags.append(f"{stage}: category {key!r} is not a list; ignored")
            continue
        for raw in names:
            name = canonical(str(raw))
            if not name:
                continue
            if name in existing:
                if existing[name] != cat:
                    session.flags.append(
                        f"{stage}: {name!r} proposed under {key!r} but already in "
                        f"{CATEGORY_KEYS[existing[name]]!r}; keeping first placement"
                    )
                continue
            session.draft[cat][name] = None
            existing[name] = cat
            added += 1
    return added


def generate_attributes_comparative(
    session: GenerationSession, llm: LLMClient, image_pairs: Sequence[tuple[str, str]]
) -> GenerationSession:
    """Extract contrasting attributes from same-class image pairs."""
    if not image_pairs:
        raise GenerationError("comparative stage needs at least one image pair")
    system = prompts.load("compare_attributes")
    for left, right in image_pairs:
        payload = json.dumps(
            {"main object class": session.main_class, "form": session.names_form()},
            ensure_ascii=False,
        )
        doc = _complete_logged(
            session, llm, "compare_attributes", system, payload, images=[left, right]
        )
        _merge_attribute_names(session, doc, "compare_attributes")
    return session


def generate_attributes_task(session: GenerationSession, llm: LLMClient) -> GenerationSession:
    """Query task-specific error-prone attributes, then self-correct.

    Classification gets the confusion-oriented prompt (needs at least
    two known classes); detection and pose estimation get the
    localization/occlusion prompt.  A validation round-trip then asks the
    client for a cleaned form; attributes it drops are removed, and an
    unusable validation response leaves the draft unchanged.
    """
    if session.task == "classification":
        if len(session.main_classes) < 2:
            raise GenerationError("classification task needs >=2 classes for confusion queries")
        system = prompts.load("task_attributes_classification")
        payload = json.dumps(
            {
                "main object class": session.main_class,
                "similar classes": session.main_classes[1:],
                "form": session.names_form(),
            },
            ensure_ascii=False,
        )
    else:
        system = prompts.load("task_attributes_localization")
        payload = json.dumps(
            {
                "main object class": session.main_class,
                "task": session.task,
                "form": session.names_form(),
            },
            ensure_ascii=False,
        )
    doc = _complete_logged(session, llm, "task_attributes", system, payload)
    _merge_attribute_names(session, doc, "task_attributes")

    # Self-correction: the client reviews its own attribute list.
    system = prompts.load("validate_attributes")
    payload = json.dumps(
        {"main object class": session.main_class, "form": session.names_form()},
        ensure_ascii=False,
    )
    try:
        cleaned = _complete_logged(session, llm, "validate_attributes", system, payload)
    except GenerationError:
        session.flags.append("validate_attributes: unusable response; draft kept unchanged")
        return session
    if not isinstance(cleaned, dict):
        session.flags.append("validate_attributes: non-object response; draft kept unchanged")
        return session
    kept: set[str] = set()
    for key, names in cleaned.items():
        if key in KEY_CATEGORIES and isinstance(names, list):
            kept.update(canonical(str(n)) for n in names)
    if not kept:
        session.flags.append("validate_attributes: empty cleaned form; draft kept unchanged")
        return session
    for cat in CATEGORIES:
        for name in list(session.draft[cat].keys()):
            if name not in kept:
                del session.draft[cat][name]
                session.flags.append(f"validate_attributes: removed {name!r}")
    return session


def determine_tags(session: GenerationSession, llm: LLMClient) -> GenerationSession:
    """Give every draft attribute a tag list.

    Binary ("is ...") attributes get yes/no regardless of what the
    client says (plus "not visible" when proposed); open-ended
    attributes need at least two distinct tags.  Attributes still
    missing usable tags are re-requested; leftovers after the retry
    budget are an error naming the first offender.
    """
    if not any(ts is None for cat in CATEGORIES for ts in session.draft[cat].values()):
        raise GenerationError("determine_tags: no attribute is missing tags")
    system = prompts.load("determine_tags")
    failure = ""
    for _ in range(session.config.retries + 1):
        payload = json.dumps(
            {"main object class": session.main_class, "form": session.names_form()},
            ensure_ascii=False,
        )
        if failure:
            payload += "\n\nYour previous output was invalid: " + failure
        try:
            doc = _complete_logged(session, llm, "determine_tags", system, payload)
        except GenerationError as exc:
            failure = str(exc)
            continue
        proposed = _flatten_category_form(doc)
        pending: list[str] = []
        for cat in CATEGORIES:
            for name, current in session.draft[cat].items():
                if current is not None:
                    continue
                tags = _usable_tags(name, proposed.get(name))
                if tags is None:
                    pending.append(name)
                else:
                    session.draft[cat][name] = tags
        if not pending:
            return session
        failure = "these attributes still need at least two usable tags: " + ", ".join(pending)
    missing = [
        name
        for cat in CATEGORIES
        for name, ts in session.draft[cat].items()
        if ts is None
    ]
    raise GenerationError(
        f"determine_tags: attribute {missing[0]!r} has fewer than 2 usable tags after retries"
    )


def _usable_tags(name: str, raw) -> Optional[list[str]]:
    """Canonicalize a proposed tag list; None when unusable."""
    if name.startswith(BINARY_PREFIX):
        tags = list(BINARY_TAGS)
        if isinstance(raw, list) and any(canonical(str(t)) == NOT_VISIBLE for t in raw):
            tags.append(NOT_VISIBLE)
        return tags
    if not isinstance(raw, list):
        return None
    tags: list[str] = []
    for t in raw:
        t = canonical(str(t))
        if t and t not in tags:
            tags.append(t)
    return tags if len(tags) >= 2 else None


def _flatten_category_form(doc) -> dict:
    """{category: {attr: value}} → {attr: value}, canonical attr names."""
    out: dict[str, object] = {}
    if not isinstance(doc, dict):
        return out
    for key, section in doc.items():
        if key in KEY_CATEGORIES and isinstance(section, dict):
            for name, value in section.items():
                out[canonical(str(name))] = value
    return out


def refine_tags_from_data(
    session: GenerationSession, llm: LLMClient, subset: Sequence[str]
) -> AttributeSchema:
    """Review a data subset for missing tags, then freeze the schema.

    Proposed additions are appended (never removed); duplicates and
    anything that would break an invariant (new tags on binary
    attributes other than "not visible") are ignored.  Unusable
    responses skip that image.  Returns the validated, frozen schema.
    """
    for cat in CATEGORIES:
        for name, ts in session.draft[cat].items():
            if ts is None:
                raise GenerationError(f"refine_tags_from_data: {name!r} has no tags yet")
    system = prompts.load("review_tags")
    for ref in subset:
        payload = json.dumps(
            {
                "image": ref,
                "main object class": session.main_class,
                "form": session.tags_form(),
            },
            ensure_ascii=False,
        )
        try:
            doc = _complete_logged(session, llm, "review_tags", system, payload, images=[ref])
        except GenerationError:
            session.flags.append(f"review_tags: unusable response for {ref!r}; skipped")
            continue
        proposed = _flatten_category_form(doc)
        for cat in CATEGORIES:
            for name, tags in session.draft[cat].items():
                raw = proposed.get(name)
                if not isinstance(raw, list):
                    continue
                for t in raw:
                    t = canonical(str(t))
                    if not t or t in tags:
                        continue
                    if name.startswith(BINARY_PREFIX) and t != NOT_VISIBLE:
                        session.flags.append(
                            f"review_tags: rejected tag {t!r} for binary attribute {name!r}"
                        )
                        continue
                    tags.append(t)
    return build_schema(session)


def build_schema(session: GenerationSession) -> AttributeSchema:
    """Freeze the draft into a validated AttributeSchema."""
    attributes = []
    for cat in CATEGORIES:
        for name, tags in session.draft[cat].items():
            attributes.append(make_attribute(name, cat, tags or []))
    return AttributeSchema(attributes=tuple(attributes), task=session.task)


# ---------------------------------------------------------------------------
# Dataset-wide tag assignment


@dataclass
class TaggingResult:
    dataset: TaggedDataset
    quarantined: list[tuple[str, str]]  # (ref, reason), in input order


def assign_tags(
    schema: AttributeSchema,
    llm: LLMClient,
    refs: Sequence[str],
    parallelism: int = 8,
    retries: int = 2,
    main_class: str = "",
    checkpoint_path: Optional[str] = None,
) -> TaggingResult:
    """Tag every sample, in parallel, with retry-then-quarantine semantics.

    Requests for different samples are independent and run concurrently
    up to ``parallelism``.  A sample whose responses stay invalid after
    the retry budget is quarantined with its last failure reason; the
    run continues.  A TransportError aborts the run after in-flight
    requests finish — completed work is in the checkpoint, and rerunning
    with the same checkpoint path resumes where it stopped.
    """
    system = prompts.load("assign_tags")
    done: dict[str, dict] = {}
    if checkpoint_path and os.path.exists(checkpoint_path):
        done = _load_checkpoint(checkpoint_path)
    pending = [r for r in refs if r not in done]

    lock = threading.Lock()
    checkpoint_file = open(checkpoint_path, "a", encoding="utf-8") if checkpoint_path else None

    def record(ref: str, entry: dict) -> None:
        with lock:
            done[ref] = entry
            if checkpoint_file:
                checkpoint_file.write(json.dumps({"id": ref, **entry}, ensure_ascii=False) + "\n")
                checkpoint_file.flush()

    def tag_one(ref: str) -> None:
        failure = ""
        for _ in range(retries + 1):
            payload = json.dumps(
                {
                    "image": ref,
                    "main object class": main_class,
                    "form": schema.to_document(),
                },
                ensure_ascii=False,
            )
            if failure:
                payload += "\n\nYour previous output was invalid: " + failure
            response = llm.complete(system, payload, images=[ref])
            try:
                doc = parse_json_response(response)
            except StrictParseError as exc:
                failure = str(exc)
                continue
            flat = _flatten_category_form(doc)
            tags = {k: canonical(str(v)) for k, v in flat.items() if isinstance(v, str)}
            report = validate_assignment(schema, tags)
            if report.ok:
                record(ref, {"tags": tags})
                return
            failure = report.describe()
        record(ref, {"error": failure or "invalid response"})

    try:
        if parallelism <= 1 or len(pending) <= 1:
            for ref in pending:
                tag_one(ref)
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                futures = [pool.submit(tag_one, ref) for ref in pending]
                done_set, not_done = wait(futures, return_when=FIRST_EXCEPTION)
                for f in not_done:
                    f.cancel()
                for f in done_set:
                    f.result()  # surface TransportError
    finally:
        if checkpoint_file:
            checkpoint_file.close()

    samples = []
    quarantined = []
    for ref in refs:
        entry = done.get(ref)
        if entry is None:
            quarantined.append((ref, "not processed (run aborted)"))
        elif "tags" in entry:
            samples.append(Sample(id=ref, tags=dict(entry["tags"])))
        else:
            quarantined.append((ref, str(entry.get("error", "unknown"))))
    if quarantined:
        logger.warning("assign_tags: %d sample(s) quarantined", len(quarantined))
    return TaggingResult(dataset=TaggedDataset(schema, samples), quarantined=quarantined)


def _load_checkpoint(path: str) -> dict[str, dict]:
    """Read a tagging checkpoint, tolerating a torn final line."""
    done: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # interrupted mid-write
            if isinstance(rec, dict) and "id" in rec:
                entry = {k: v for k, v in rec.items() if k != "id"}
                done[str(rec["id"])] = entry
    return done
