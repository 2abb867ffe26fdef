"""Define an attribute universe, tag a dataset through the stub client.

The schema document groups attributes by what they describe (main object /
background / global); binary "is ..." attributes answer yes/no. Tagging
runs the full pipeline against the deterministic built-in stub, so this
demo needs no network.
"""

import json

from slicescope import StubLLMClient, validate_assignment
from slicescope.generate import assign_tags
from slicescope.schema import load_schema
from slicescope.synth import oracle_llm_responder, pose_reference_schema

doc = {
    "version": "1",
    "task": "classification",
    "main object": {
        "object color": ["white", "brown", "black"],
        "is object damaged": ["yes", "no"],
    },
    "background": {"is sky presented": ["yes", "no", "not visible"]},
    "global": {"brightness": ["high", "medium", "low"]},
}
schema = load_schema(json.dumps(doc))
print(f"schema: {len(schema.attributes)} attributes, task={schema.task}")

report = validate_assignment(schema, {
    "object color": "white",
    "is object damaged": "no",
    "is sky presented": "not visible",
    "brightness": "low",
})
print("assignment admissible:", report.ok)

report = validate_assignment(schema, {"object color": "purple-ish"})
print("broken assignment:", report.describe())

# Dataset-wide tagging with a scripted client that knows a ground-truth
# world; quarantine collects samples whose responses stay invalid.
world = pose_reference_schema()
client = StubLLMClient(responder=oracle_llm_responder(world))
result = assign_tags(world, client, [f"img_{i:03d}" for i in range(25)], parallelism=8)
print(f"tagged {len(result.dataset)} samples, {len(result.quarantined)} quarantined")
print("first sample tags (3 shown):",
      dict(list(result.dataset.samples[0].tags.items())[:3]))
