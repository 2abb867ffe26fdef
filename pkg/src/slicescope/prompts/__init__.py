"""Versioned prompt templates, loaded from package data.

Template files carry their version in the filename; the registry pins
which version each pipeline stage uses.
"""

from importlib import resources

PROMPTS = {
    "compare_attributes": "compare_attributes.v1.txt",
    "task_attributes_classification": "task_attributes_classification.v1.txt",
    "task_attributes_localization": "task_attributes_localization.v1.txt",
    "validate_attributes": "validate_attributes.v1.txt",
    "determine_tags": "determine_tags.v1.txt",
    "review_tags": "review_tags.v1.txt",
    "assign_tags": "assign_tags.v1.txt",
    "predict_slices_classification": "predict_slices_classification.v1.txt",
    "predict_slices_localization": "predict_slices_localization.v1.txt",
}


def load(name: str) -> str:
    filename = PROMPTS[name]
    return resources.files(__package__).joinpath(filename).read_text(encoding="utf-8")


def version(name: str) -> str:
    return PROMPTS[name].rsplit(".", 2)[-2]
