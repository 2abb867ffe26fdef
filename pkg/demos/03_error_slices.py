"""Find and rank a model's error slices; compare two models.

The lattice is built once; each model is attached separately. A slice
survives post-processing only if its extra tag makes performance worse
than every parent context, and becomes an error slice when its average
lands at least C below the model's overall mean.
"""

from slicescope.analyze import attach_model, identify_error_slices, postprocess, slice_overlap
from slicescope.lattice import EnumConfig, enumerate_efficient
from slicescope.schema import build_index
from slicescope.synth import reference_corpus, scripted_performance, with_performance

dataset = reference_corpus(n=3000, seed=11)
index = build_index(dataset)
lattice = enumerate_efficient(index, EnumConfig(max_depth=3, min_count=10))
print(f"shared lattice: {len(lattice)} slices")

# Plant a hard combination that actually occurs: take a mid-frequency
# depth-2 slice from the lattice as the failure mode both models share;
# the second model additionally struggles with one depth-1 slice.
shared_hard = next(s.pairs for s in lattice.layers[1] if 100 <= s.count <= 600)
extra_hard = next(s.pairs for s in lattice.layers[0]
                  if 150 <= s.count <= 900 and not set(s.pairs) & set(shared_hard))
print(f"planted shared failure: {shared_hard}")
print(f"planted model-b extra failure: {extra_hard}")

perf_a = scripted_performance(dataset, [(shared_hard, 0.35)], default=0.93)
perf_b = scripted_performance(dataset, [(shared_hard, 0.40), (extra_hard, 0.55)], default=0.91)

reports = {}
for model_id, perf in (("model-a", perf_a), ("model-b", perf_b)):
    scored = with_performance(dataset, perf)
    view = postprocess(attach_model(lattice, scored, model_id))
    report = identify_error_slices(view, 0.2)
    reports[model_id] = report
    print(f"\n{model_id}: overall {report.overall_perf:.3f}, "
          f"{len(report.error_slices)} error slices; worst three:")
    for entry in report.error_slices[:3]:
        print(f"  avg={entry.avg_perf:.3f} count={entry.count} {entry.key}")

overlap = slice_overlap(reports["model-a"], reports["model-b"], fraction=0.1, symmetric=True)
print(f"\ntop-10% slice overlap between the models: {overlap:.2f}")
