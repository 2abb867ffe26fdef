"""Synthetic schemas and datasets.

Real tagged corpora are produced by the generation pipeline; everything
here manufactures stand-ins with the same shape for tests, demos, and
the enumeration benchmark.  The benchmark corpus mimics a person
pose-estimation tagging universe (46 attributes, about 4 tags each) and
draws samples from a mixture of latent scene "modes", which gives the
tag columns the strong cross-attribute correlation and heavy-tailed
marginals that make real slice distributions sparse.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .schema import (
    AttributeSchema,
    BACKGROUND,
    CATEGORY_KEYS,
    GLOBAL,
    MAIN_OBJECT,
    Sample,
    TaggedDataset,
    make_attribute,
)

# (name, tags) per category; binary attributes get yes/no implicitly.
_POSE_MAIN = [
    ("is arm crossing", None),
    ("pose complexity", ["simple", "medium", "complex", "very complex", "not visible"]),
    ("clothes color", ["red", "blue", "green", "yellow", "black", "white", "gray", "orange", "purple", "multicolor"]),
    ("is standing on one leg", None),
    ("is carrying something", None),
    ("is on all fours", None),
    ("pose", ["sitting", "jumping", "lying down", "standing", "walking", "running", "bending", "stretching", "kicking"]),
    ("head orientation", ["front", "back", "sideways", "tilted", "downward", "upward"]),
    ("size", ["large", "medium", "small", "tiny", "huge"]),
    ("object orientation", ["upright", "sideways", "inverted", "leaning", "diagonal"]),
    ("is sitting", None),
    ("is using props", None),
    ("leg position", ["together", "apart", "crossed", "kneeling", "wide stance", "not visible"]),
    ("limb visibility", ["both arms visible", "one arm visible", "arms not visible", "legs not visible", "all limbs visible"]),
    ("is crouching", None),
    ("is partially occluded", None),
    ("clothes type", ["casual", "formal", "sportswear", "uniform", "swimwear", "traditional"]),
    ("facial expression", ["smiling", "frowning", "neutral", "surprised", "crying", "not visible"]),
    ("is holding hands behind back", None),
    ("is leg crossing", None),
    ("clothes fit", ["tight", "loose", "fitted", "not visible"]),
]
_POSE_BACKGROUND = [
    ("is sky presented", None),
    ("clutter", ["high", "medium", "low", "none"]),
    ("is natural habitat presented", None),
    ("background style", ["urban", "rural", "natural", "artificial", "indoors", "industrial", "suburban"]),
    ("indoor lighting", ["bright", "dim", "natural", "artificial", "mixed", "not visible"]),
    ("is dynamic", None),
    ("is containing other people", None),
    ("is background similar in color to main object", None),
    ("background color", ["red", "blue", "green", "gray", "white", "brown", "black", "yellow"]),
    ("is containing reflective surfaces", None),
    ("is indoor", None),
    ("weather", ["sunny", "cloudy", "rainy", "snowy", "foggy", "not visible"]),
    ("time of day", ["morning", "afternoon", "evening", "night", "dawn"]),
]
_POSE_GLOBAL = [
    ("overall color temperature", ["warm", "neutral", "cool"]),
    ("image saturation", ["high", "medium", "low"]),
    ("resolution", ["high", "medium", "low", "very low"]),
    ("camera angle", ["level", "high angle", "low angle", "overhead", "tilted"]),
    ("noise level", ["high", "medium", "low", "none"]),
    ("brightness", ["high", "medium", "low", "very low"]),
    ("camera distance from main object", ["close-up", "medium shot", "wide shot", "extreme wide"]),
    ("sharpness", ["sharp", "medium", "blurry", "very blurry"]),
    ("overall tone", ["warm", "cool", "neutral"]),
    ("image orientation", ["portrait", "landscape", "square"]),
    ("is blurred", None),
    ("contrast", ["high", "medium", "low"]),
]


def pose_reference_schema() -> AttributeSchema:
    """The 46-attribute person-pose tagging universe used by the benchmark."""
    attributes = []
    for cat, spec in ((MAIN_OBJECT, _POSE_MAIN), (BACKGROUND, _POSE_BACKGROUND), (GLOBAL, _POSE_GLOBAL)):
        for name, tags in spec:
            attributes.append(make_attribute(name, cat, tags or ["yes", "no"]))
    return AttributeSchema(attributes=tuple(attributes), task="pose_estimation")


def _zipf_weights(k: int, s: float = 1.1) -> np.ndarray:
    w = 1.0 / np.arange(1, k + 1) ** s
    return w / w.sum()


def random_schema(
    rng: np.random.Generator,
    n_attrs: int = 5,
    min_tags: int = 2,
    max_tags: int = 5,
    task: str = "other",
) -> AttributeSchema:
    """A small anonymous schema for randomized tests."""
    categories = [MAIN_OBJECT, BACKGROUND, GLOBAL]
    attributes = []
    for i in range(n_attrs):
        k = int(rng.integers(min_tags, max_tags + 1))
        attributes.append(
            make_attribute(
                f"attr {i:02d}",
                categories[int(rng.integers(0, 3))],
                [f"tag {j}" for j in range(k)],
            )
        )
    return AttributeSchema(attributes=tuple(attributes), task=task)


def dataset_from_codes(
    schema: AttributeSchema,
    codes: np.ndarray,
    performance: Optional[np.ndarray] = None,
    groups: Optional[Sequence[Optional[str]]] = None,
    id_prefix: str = "s",
) -> TaggedDataset:
    """Materialize a TaggedDataset from a tag-code matrix."""
    samples = []
    for i in range(codes.shape[0]):
        tags = {
            attr.name: attr.tags[int(codes[i, j])]
            for j, attr in enumerate(schema.attributes)
        }
        samples.append(
            Sample(
                id=f"{id_prefix}{i:06d}",
                tags=tags,
                performance=None if performance is None else float(performance[i]),
                group=None if groups is None else groups[i],
            )
        )
    return TaggedDataset(schema, samples)


def random_codes(
    schema: AttributeSchema,
    n: int,
    rng: np.random.Generator,
    skew: float = 1.1,
) -> np.ndarray:
    """Independent per-attribute draws with Zipf-skewed marginals."""
    codes = np.empty((n, len(schema.attributes)), dtype=np.int16)
    for j, attr in enumerate(schema.attributes):
        codes[:, j] = rng.choice(len(attr.tags), size=n, p=_zipf_weights(len(attr.tags), skew))
    return codes


def random_dataset(
    schema: AttributeSchema,
    n: int,
    rng: np.random.Generator,
    skew: float = 1.1,
    with_performance: bool = True,
) -> TaggedDataset:
    codes = random_codes(schema, n, rng, skew)
    perf = rng.random(n) if with_performance else None
    return dataset_from_codes(schema, codes, perf)


def _marginal_weights(attr) -> np.ndarray:
    """Off-mode noise marginals: one dominant tag, a hairline of others.

    In a visually homogeneous corpus almost all variation is coherent
    (scene-driven); a tag that no scene mode anchors shows up only as
    rare tagging noise.
    """
    k = len(attr.tags)
    w = np.full(k, 0.001)
    dominant = 1 if k == 2 else 0  # binary attributes overwhelmingly answer "no"
    w[dominant] = 1.0 - 0.001 * (k - 1)
    return w


def mode_mixture_codes(
    schema: AttributeSchema,
    n: int,
    rng: np.random.Generator,
    n_modes: int = 5,
    adherence: float = 0.97,
    mode_spread: float = 0.15,
) -> np.ndarray:
    """Draw tag codes from a latent scene-mode mixture.

    Each mode fixes a preferred tag per attribute, drawn from the
    marginals blended with a uniform component so a mode occasionally
    anchors a rare tag and gives it a coherent context; a sample follows
    its mode's preference with probability ``adherence`` per attribute
    and otherwise falls back to a marginal draw.  Tag combinations no
    mode prefers are therefore rare, which is what real tagged corpora
    look like and what makes count-based pruning effective.
    """
    n_attrs = len(schema.attributes)
    prefs = np.empty((n_modes, n_attrs), dtype=np.int16)
    weights = [_marginal_weights(attr) for attr in schema.attributes]
    for j in range(n_attrs):
        k = len(weights[j])
        pref_w = (1.0 - mode_spread) * weights[j] + mode_spread / k
        prefs[:, j] = rng.choice(k, size=n_modes, p=pref_w)
    mode_of = rng.choice(n_modes, size=n, p=_zipf_weights(n_modes, 1.0))
    codes = np.empty((n, n_attrs), dtype=np.int16)
    for j in range(n_attrs):
        fallback = rng.choice(len(weights[j]), size=n, p=weights[j])
        pick_pref = rng.random(n) < adherence
        codes[:, j] = np.where(pick_pref, prefs[mode_of, j], fallback)
    return codes


def reference_corpus(
    n: int = 7000,
    seed: int = 7,
    schema: Optional[AttributeSchema] = None,
) -> TaggedDataset:
    """The benchmark corpus: pose-scale schema, mode-mixture tags, no scores."""
    schema = schema or pose_reference_schema()
    rng = np.random.default_rng(seed)
    codes = mode_mixture_codes(schema, n, rng)
    return dataset_from_codes(schema, codes)


def scripted_performance(
    dataset: TaggedDataset,
    rules: Sequence[tuple[Sequence[tuple[str, str]], float]],
    default: float = 0.95,
) -> np.ndarray:
    """Per-sample scores driven by known tag combinations.

    Rules are (pairs, score); the first matching rule wins, everything
    else gets the default.  Used to plant recoverable error slices.
    """
    perf = np.full(len(dataset), default, dtype=np.float64)
    assigned = np.zeros(len(dataset), dtype=bool)
    for pairs, score in rules:
        mask = np.ones(len(dataset), dtype=bool)
        for attribute, tag in pairs:
            j = dataset.schema.index_of(attribute)
            code = dataset.schema.attributes[j].tag_code(tag)
            mask &= dataset.codes[:, j] == code
        take = mask & ~assigned
        perf[take] = score
        assigned |= take
    return perf


def with_performance(dataset: TaggedDataset, performance: np.ndarray) -> TaggedDataset:
    """Copy of the dataset with the given performance column."""
    samples = [
        Sample(id=s.id, tags=s.tags, performance=float(performance[i]), group=s.group)
        for i, s in enumerate(dataset.samples)
    ]
    return TaggedDataset(dataset.schema, samples)


def oracle_llm_responder(schema: AttributeSchema, seed: int = 0):
    """A scripted client responder backed by a ground-truth schema.

    Answers every pipeline request consistently with ``schema``:
    attribute queries return its attribute names, tag queries its tag
    lists, reviews propose nothing, and tag assignment draws a valid
    deterministic assignment keyed on the image reference.  Lets the
    full generation pipeline and the CLI run end to end without a live
    model service.
    """
    import hashlib
    import json as _json

    names_form = {
        key: [a.name for a in schema.attributes if a.category == cat]
        for cat, key in CATEGORY_KEYS.items()
    }
    tags_form = {
        key: {a.name: list(a.tags) for a in schema.attributes if a.category == cat}
        for cat, key in CATEGORY_KEYS.items()
    }

    def assignment_for(ref: str) -> dict:
        out: dict[str, dict[str, str]] = {k: {} for k in names_form}
        for cat, key in CATEGORY_KEYS.items():
            for a in schema.attributes:
                if a.category != cat:
                    continue
                digest = hashlib.sha256(f"{seed}:{ref}:{a.name}".encode()).digest()
                out[key][a.name] = a.tags[digest[0] % len(a.tags)]
        return out

    def responder(system_prompt: str, user_payload: str, images=None) -> str:
        if "spotting the differences" in system_prompt or "proposing visual attributes" in system_prompt:
            return _json.dumps(names_form)
        if "validating a list of visual attributes" in system_prompt:
            return _json.dumps(names_form)
        if "finding all possible tags" in system_prompt:
            return _json.dumps(tags_form)
        if "proposing tags that are missing" in system_prompt:
            return _json.dumps({k: {} for k in names_form})
        if "tagging images" in system_prompt:
            ref = images[0] if images else _json.loads(user_payload).get("image", "")
            return _json.dumps(assignment_for(ref))
        if "predicting attribute-tag combinations" in system_prompt:
            payload = _json.loads(user_payload.split("\n\n", 1)[0])
            k = int(payload.get("number of attribute-tag pairs", 3))
            combo: dict[str, dict[str, str]] = {}
            for a in schema.attributes[:k]:
                combo.setdefault(CATEGORY_KEYS[a.category], {})[a.name] = a.tags[0]
            return _json.dumps({"predictions": [combo]})
        return _json.dumps({})

    return responder


def plant_combo(
    schema: AttributeSchema,
    n_background: int,
    n_planted: int,
    combo: Sequence[tuple[str, str]],
    rng: np.random.Generator,
    skew: float = 1.1,
) -> TaggedDataset:
    """Background draws plus ``n_planted`` samples forced into ``combo``.

    Planted samples share the combo's pairs exactly; their remaining
    attributes are random.  Samples are shuffled so the plant is not
    positional.
    """
    codes = random_codes(schema, n_background + n_planted, rng, skew)
    for attribute, tag in combo:
        j = schema.index_of(attribute)
        codes[n_background:, j] = schema.attributes[j].tag_code(tag)
    rng.shuffle(codes, axis=0)
    return dataset_from_codes(schema, codes)
