"""Time the three enumeration algorithms on the reference corpus.

The pruned matched-pair algorithm should come out far ahead of the
brute-force baseline and well ahead of the unpruned tree; wall time grows
roughly linearly with data volume. Equivalent to `slicescope bench --scaling`.
"""

from slicescope.bench import run_benchmark, run_scaling

result = run_benchmark(depth=3, min_count=10, n_samples=7000, seed=7)
print(result.table())
print(f"\nefficient vs naive: {result.speedup('naive'):.1f}x, "
      f"vs tree: {result.speedup('tree'):.1f}x")

print("\nscaling with data volume:")
for n, seconds, slices in run_scaling(sizes=(2000, 4000, 8000)):
    print(f"  N={n:>5}: {seconds:.3f}s  ({slices} slices)")
