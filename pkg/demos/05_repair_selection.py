"""Prioritize new data for model repair.

Selection walks the ranked error slices worst-first and claims matching
pool samples; for object-level tasks whole images are ranked by their
best-matching member object.
"""

from slicescope.analyze import attach_model, identify_error_slices, postprocess
from slicescope.lattice import EnumConfig, enumerate_efficient
from slicescope.repair import prioritize_groups, prioritize_pool
from slicescope.schema import Sample, TaggedDataset, build_index
from slicescope.synth import reference_corpus, scripted_performance, with_performance

dataset = reference_corpus(n=2500, seed=17)
index = build_index(dataset)
lattice = enumerate_efficient(index, EnumConfig(max_depth=2, min_count=10))
hard = next(s.pairs for s in lattice.layers[1] if 100 <= s.count <= 600)
scored = with_performance(dataset, scripted_performance(dataset, [(hard, 0.4)], default=0.9))
report = identify_error_slices(postprocess(attach_model(lattice, scored, "m")), 0.2)
print(f"planted failure {hard}; {len(report.error_slices)} error slices")

# An unscored pool tagged under the same schema (same generator, new draw).
pool = reference_corpus(n=800, seed=18)
plan = prioritize_pool(report, pool, budget=40)
print(f"\nplan: {len(plan.selections)} samples; first five:")
for sel in plan.selections[:5]:
    why = f"slice {sel.slice_key} (avg {sel.slice_avg_perf:.3f})" if sel.slice_key else "budget fill"
    print(f"  {sel.id}  <- {why}")

# Object-level: group pool samples four objects per image.
grouped = TaggedDataset(pool.schema, [
    Sample(id=s.id, tags=s.tags, group=f"image_{i // 4:03d}")
    for i, s in enumerate(pool.samples)
])
group_plan = prioritize_groups(report, grouped, budget=10)
print(f"\ngroup plan: {[sel.id for sel in group_plan.selections]}")
