import numpy as np
import pytest

from slicescope.schema import (
    AttributeSchema,
    Sample,
    TaggedDataset,
    make_attribute,
)


def make_schema(spec: dict[str, list[str]], task: str = "other") -> AttributeSchema:
    """Quick schema builder; everything lands under main_object."""
    attrs = tuple(make_attribute(name, "main_object", tags) for name, tags in spec.items())
    return AttributeSchema(attributes=attrs, task=task)


def make_dataset(schema, rows, performance=None, groups=None) -> TaggedDataset:
    """rows: list of tag dicts; performance/groups: optional parallel lists."""
    samples = []
    for i, tags in enumerate(rows):
        samples.append(
            Sample(
                id=f"s{i}",
                tags=tags,
                performance=None if performance is None else performance[i],
                group=None if groups is None else groups[i],
            )
        )
    return TaggedDataset(schema, samples)


def brute_force_members(dataset, pairs) -> list[int]:
    """Independent slice-membership oracle: per-sample linear scan."""
    out = []
    for i, s in enumerate(dataset.samples):
        if all(s.tags[a] == t for a, t in pairs):
            out.append(i)
    return out


@pytest.fixture
def two_by_two():
    """2 attributes x 2 tags, one sample per tag combination."""
    schema = make_schema({"color": ["red", "blue"], "pose": ["sitting", "standing"]})
    rows = [
        {"color": c, "pose": p}
        for c in ["red", "blue"]
        for p in ["sitting", "standing"]
    ]
    return schema, make_dataset(schema, rows)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
