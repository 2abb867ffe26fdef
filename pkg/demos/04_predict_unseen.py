"""Predict error slices beyond the validation set, then measure them.

Tag substitution swaps one tag of a known error slice for its nearest
neighbour in embedding space; instruction-based prediction asks a
completion client for risky combinations outright. Both outputs are
validated against the schema and evaluated as degradation versus the
overall mean.
"""

import json

from slicescope import StubLLMClient
from slicescope.analyze import attach_model, identify_error_slices, postprocess
from slicescope.lattice import EnumConfig, enumerate_efficient
from slicescope.predict import HashEmbedding, evaluate_predicted, instruct_predict, substitute_tags
from slicescope.schema import build_index
from slicescope.synth import reference_corpus, scripted_performance, with_performance

dataset = reference_corpus(n=3000, seed=13)
index = build_index(dataset)
lattice = enumerate_efficient(index, EnumConfig(max_depth=2, min_count=10))
hard = next(s.pairs for s in lattice.layers[1] if 100 <= s.count <= 600)
scored = with_performance(dataset, scripted_performance(dataset, [(hard, 0.3)], default=0.92))
report = identify_error_slices(postprocess(attach_model(lattice, scored, "m")), 0.2)
print(f"planted failure {hard}; {len(report.error_slices)} identified error slices")

predicted = substitute_tags(report, scored.schema, HashEmbedding(dim=16), top_k=5)
print("\ntag substitution predictions:")
for p in predicted[:4]:
    print(f"  {p.pairs}  (replaced {p.replaced})")

# Instruction-based prediction through a scripted client.
stub = StubLLMClient(responses=[json.dumps({"predictions": [
    {"global": {"sharpness": "blurry", "noise level": "high"},
     "main object": {"is partially occluded": "yes"}},
]})])
instructed = instruct_predict(scored.schema, stub, pair_count=3, main_class="person",
                              task="pose_estimation")
print("\ninstruction-based predictions:", [p.pairs for p in instructed])

table = evaluate_predicted(predicted + instructed, scored, min_count=5)
print(f"\nmatched {len(table.rows)} predictions; "
      f"mean degradation {table.mean_degradation:+.3f}; "
      f"{len(table.unmatched)} unmatched")
for row in table.rows[:3]:
    print(f"  {row.degradation:+.3f} ({row.count} samples) {row.pairs}")
