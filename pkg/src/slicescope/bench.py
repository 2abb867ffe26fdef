"""Enumeration benchmark on the synthetic reference corpus.

Runs the three algorithms on the pose-scale corpus (46 attributes,
N=7000 by default), checks they agree, and reports wall times with
speedup ratios; a scaling sweep times the pruned algorithm across
growing data volumes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .lattice import (
    EnumConfig,
    enumerate_efficient,
    enumerate_naive,
    enumerate_tree,
)
from .schema import TaggedDataset, build_index
from .synth import reference_corpus


@dataclass
class BenchResult:
    n_samples: int
    depth: int
    min_count: int
    slices: int
    seconds: dict[str, float] = field(default_factory=dict)

    def speedup(self, baseline: str) -> float:
        return self.seconds[baseline] / self.seconds["efficient"]

    def table(self) -> str:
        lines = [
            f"enumeration benchmark: N={self.n_samples}, depth={self.depth}, "
            f"min_count={self.min_count}, surviving slices={self.slices}",
            f"{'algorithm':<12} {'seconds':>10} {'speedup vs efficient':>22}",
        ]
        for name in ("naive", "tree", "efficient"):
            if name not in self.seconds:
                continue
            ratio = self.seconds[name] / self.seconds["efficient"]
            lines.append(f"{name:<12} {self.seconds[name]:>10.3f} {ratio:>21.1f}x")
        return "\n".join(lines)


def run_benchmark(
    depth: int = 3,
    min_count: int = 10,
    n_samples: int = 7000,
    seed: int = 7,
    dataset: Optional[TaggedDataset] = None,
    algorithms: tuple[str, ...] = ("naive", "tree", "efficient"),
) -> BenchResult:
    """Time the three enumeration algorithms on one corpus.

    The slice sets are verified identical across whichever algorithms
    run; a mismatch is a bug, not a benchmark result.
    """
    ds = dataset if dataset is not None else reference_corpus(n_samples, seed=seed)
    index = build_index(ds)
    cfg = EnumConfig(max_depth=depth, min_count=min_count)
    result = BenchResult(
        n_samples=len(ds), depth=depth, min_count=min_count, slices=0
    )
    outputs = {}
    runners = {
        "naive": enumerate_naive,
        "tree": enumerate_tree,
        "efficient": enumerate_efficient,
    }
    for name in algorithms:
        t0 = time.perf_counter()
        out = runners[name](index, cfg)
        result.seconds[name] = time.perf_counter() - t0
        if name == "efficient":
            outputs[name] = {s.pairs: s.count for s in out.all_slices()}
        else:
            outputs[name] = {k: s.count for k, s in out.items()}
    sets = list(outputs.values())
    for other in sets[1:]:
        if other != sets[0]:
            raise AssertionError("benchmark algorithms disagree on the slice set")
    result.slices = len(sets[0])
    return result


def run_scaling(
    sizes: tuple[int, ...] = (2000, 4000, 8000),
    depth: int = 3,
    min_count: int = 10,
    seed: int = 7,
) -> list[tuple[int, float, int]]:
    """Wall time of the pruned algorithm across data volumes.

    Returns (n_samples, seconds, slice count) per size, same schema and
    generator throughout.
    """
    out = []
    cfg = EnumConfig(max_depth=depth, min_count=min_count)
    for n in sizes:
        ds = reference_corpus(n, seed=seed)
        index = build_index(ds)
        t0 = time.perf_counter()
        lattice = enumerate_efficient(index, cfg)
        out.append((n, time.perf_counter() - t0, len(lattice)))
    return out
