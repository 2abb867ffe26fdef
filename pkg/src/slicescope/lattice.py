"""Slice enumeration: brute force, tree-structured, and pruned/intersected.

A slice is a conjunction of (attribute, tag) pairs, one tag per
participating attribute; its members are the samples matching every
pair.  All slices of depth <= D with at least M members are enumerated
by three interchangeable algorithms:

* ``enumerate_naive`` lists every attribute-tag combination up front and
  counts each one against the full dataset.  It exists as the oracle and
  as the slow end of the benchmark; a safety cap refuses instances whose
  combination bound is absurd.
* ``enumerate_tree`` grows combinations breadth-first and counts each
  child only within its parent's member set.  No pruning: children of
  undersized slices are still generated (their scans are just cheap),
  and the size filter runs after expansion.
* ``enumerate_efficient`` additionally prunes: a depth-k candidate is
  generated only by intersecting two surviving depth-(k-1) slices that
  agree on all but one attribute (a "matched pair", found via hash
  buckets), and only if all k of its parents survived.  Counting is
  word-wise AND + popcount on packed bit-vectors.  Because member counts
  never increase when a pair is added, discarding a small slice soundly
  discards its whole subtree.

The three produce identical slice sets; only ``enumerate_efficient``
returns the full layered lattice with parent links.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import bitvec
from .schema import IndicatorIndex

# Canonical slice key: ((attribute, tag), ...) sorted by attribute name.
SliceKey = tuple[tuple[str, str], ...]


class EnumerationCapExceeded(RuntimeError):
    """The combination bound exceeds the configured safety cap."""


@dataclass(frozen=True)
class EnumConfig:
    max_depth: int = 3
    min_count: int = 10
    naive_cap: int = 100_000_000
    threads: int = 1

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")


@dataclass
class Slice:
    """A coherent data subset: canonical pairs plus its member bit-vector."""

    pairs: SliceKey
    members: np.ndarray  # packed uint8 bit-vector
    count: int

    @property
    def depth(self) -> int:
        return len(self.pairs)

    def member_indices(self, n: int) -> np.ndarray:
        return bitvec.indices(self.members, n)

    def parent_keys(self) -> tuple[SliceKey, ...]:
        """The k keys obtained by deleting one pair (empty at depth 1)."""
        k = len(self.pairs)
        if k <= 1:
            return ()
        return tuple(self.pairs[:i] + self.pairs[i + 1 :] for i in range(k))


def key_to_string(key: SliceKey) -> str:
    return json.dumps([list(p) for p in key], separators=(",", ":"), ensure_ascii=False)


def key_from_string(text: str) -> SliceKey:
    pairs = json.loads(text)
    return tuple(sorted((str(a), str(t)) for a, t in pairs))


def combination_bound(n_attrs: int, max_tags: int, depth: int) -> int:
    """Upper bound on the number of attribute-tag combinations up to depth."""
    return sum(math.comb(n_attrs, i) * max_tags**i for i in range(1, depth + 1))


@dataclass
class LayerStats:
    depth: int
    candidates: int
    survivors: int
    seconds: float


@dataclass
class EnumStats:
    algorithm: str
    seconds: float
    layers: list[LayerStats] = field(default_factory=list)

    def to_document(self) -> dict:
        # Wall times stay in memory only: the serialized lattice must be
        # byte-identical for a fixed input.
        return {
            "algorithm": self.algorithm,
            "layers": [
                {"depth": l.depth, "candidates": l.candidates, "survivors": l.survivors}
                for l in self.layers
            ],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "EnumStats":
        return cls(
            algorithm=str(doc.get("algorithm", "")),
            seconds=0.0,
            layers=[
                LayerStats(
                    depth=int(l["depth"]),
                    candidates=int(l["candidates"]),
                    survivors=int(l["survivors"]),
                    seconds=0.0,
                )
                for l in doc.get("layers", [])
            ],
        )


LATTICE_FORMAT_VERSION = "1"


class SliceLattice:
    """Depth-layered slices with parent links, built once per dataset.

    Layers are canonically ordered (sorted by key) so a fixed input
    always serializes to identical bytes, independent of thread count.
    """

    def __init__(
        self,
        n_samples: int,
        config: EnumConfig,
        layers: list[list[Slice]],
        stats: Optional[EnumStats] = None,
    ):
        self.n_samples = n_samples
        self.config = config
        self.layers = [sorted(layer, key=lambda s: s.pairs) for layer in layers]
        self.stats = stats
        self._by_key: dict[SliceKey, Slice] = {}
        for layer in self.layers:
            for s in layer:
                self._by_key[s.pairs] = s
        self.parent_links: dict[SliceKey, tuple[SliceKey, ...]] = {}
        for layer in self.layers[1:]:
            for s in layer:
                self.parent_links[s.pairs] = s.parent_keys()
        self._children: Optional[dict[SliceKey, list[SliceKey]]] = None

    def __len__(self) -> int:
        return len(self._by_key)

    def __contains__(self, key: SliceKey) -> bool:
        return key in self._by_key

    def get(self, key: SliceKey) -> Optional[Slice]:
        return self._by_key.get(key)

    def all_slices(self) -> Iterator[Slice]:
        for layer in self.layers:
            yield from layer

    def parents(self, key: SliceKey) -> tuple[SliceKey, ...]:
        return self.parent_links.get(key, ())

    def children(self, key: SliceKey) -> list[SliceKey]:
        if self._children is None:
            children: dict[SliceKey, list[SliceKey]] = {}
            for child, parents in self.parent_links.items():
                for p in parents:
                    children.setdefault(p, []).append(child)
            for v in children.values():
                v.sort()
            self._children = children
        return self._children.get(key, [])

    def as_dict(self) -> dict[SliceKey, Slice]:
        return dict(self._by_key)

    def to_document(self) -> dict:
        layers_doc = []
        for layer in self.layers:
            layers_doc.append(
                [
                    {
                        "key": [list(p) for p in s.pairs],
                        "count": s.count,
                        "members": bitvec.rle_encode(s.members, self.n_samples),
                    }
                    for s in layer
                ]
            )
        parents_doc = {
            key_to_string(k): [key_to_string(p) for p in ps]
            for k, ps in sorted(self.parent_links.items())
        }
        return {
            "version": LATTICE_FORMAT_VERSION,
            "kind": "slice-lattice",
            "n_samples": self.n_samples,
            "config": {"max_depth": self.config.max_depth, "min_count": self.config.min_count},
            "layers": layers_doc,
            "parents": parents_doc,
            "stats": self.stats.to_document() if self.stats else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_document(cls, doc: dict) -> "SliceLattice":
        n = int(doc["n_samples"])
        cfg = EnumConfig(
            max_depth=int(doc["config"]["max_depth"]),
            min_count=int(doc["config"]["min_count"]),
        )
        layers = []
        for layer_doc in doc["layers"]:
            layer = []
            for rec in layer_doc:
                key = tuple(sorted((str(a), str(t)) for a, t in rec["key"]))
                members = bitvec.rle_decode(rec["members"], n)
                layer.append(Slice(pairs=key, members=members, count=int(rec["count"])))
            layers.append(layer)
        stats = EnumStats.from_document(doc["stats"]) if doc.get("stats") else None
        return cls(n_samples=n, config=cfg, layers=layers, stats=stats)

    @classmethod
    def loads(cls, text: str) -> "SliceLattice":
        return cls.from_document(json.loads(text))


# ---------------------------------------------------------------------------
# Internal representation: pairs as (attribute index, tag code), sorted by
# attribute index.  Public keys (names, sorted by name) are produced at the
# boundary.


def _public_key(index: IndicatorIndex, ipairs: tuple[tuple[int, int], ...]) -> SliceKey:
    attrs = index.schema.attributes
    return tuple(sorted((attrs[a].name, attrs[a].tags[t]) for a, t in ipairs))


def _check_cap(index: IndicatorIndex, cfg: EnumConfig) -> None:
    n_attrs = len(index.schema.attributes)
    max_tags = max((len(a.tags) for a in index.schema.attributes), default=0)
    bound = combination_bound(n_attrs, max_tags, cfg.max_depth)
    if bound > cfg.naive_cap:
        raise EnumerationCapExceeded(
            f"combination bound {bound} exceeds safety cap {cfg.naive_cap} "
            f"(n={n_attrs}, max tags={max_tags}, depth={cfg.max_depth})"
        )


def enumerate_naive(index: IndicatorIndex, cfg: EnumConfig) -> dict[SliceKey, Slice]:
    """Brute force: evaluate every attribute-tag combination of depth <= D.

    Each combination is counted by masking the full code matrix, exactly
    the "search all data for every listed slice" baseline.
    """
    _check_cap(index, cfg)
    codes = index.codes
    n = index.n_samples
    tag_counts = [len(a.tags) for a in index.schema.attributes]
    out: dict[SliceKey, Slice] = {}
    for depth in range(1, cfg.max_depth + 1):
        for attrs in combinations(range(len(tag_counts)), depth):
            for tags in product(*(range(tag_counts[a]) for a in attrs)):
                mask = codes[:, attrs[0]] == tags[0]
                for a, t in zip(attrs[1:], tags[1:]):
                    mask = mask & (codes[:, a] == t)
                count = int(np.count_nonzero(mask))
                if count >= cfg.min_count:
                    key = _public_key(index, tuple(zip(attrs, tags)))
                    out[key] = Slice(pairs=key, members=bitvec.pack(mask), count=count)
    return out


def enumerate_tree(index: IndicatorIndex, cfg: EnumConfig) -> dict[SliceKey, Slice]:
    """Breadth-first tree expansion without pruning.

    Children are generated for every node of the previous depth
    (undersized ones included) by appending a pair for a later
    attribute; each child is counted only within its parent's member
    set.  The min-count filter is applied to each finished layer, never
    to the expansion itself.
    """
    _check_cap(index, cfg)
    codes = index.codes
    n = index.n_samples
    n_attrs = len(index.schema.attributes)
    tag_counts = [len(a.tags) for a in index.schema.attributes]
    out: dict[SliceKey, Slice] = {}

    # Root: the whole dataset, no pairs.
    prev: list[tuple[tuple[tuple[int, int], ...], np.ndarray]] = [
        ((), np.arange(n, dtype=np.int32))
    ]
    for depth in range(1, cfg.max_depth + 1):
        last = depth == cfg.max_depth
        cur: list[tuple[tuple[tuple[int, int], ...], np.ndarray]] = []
        for ipairs, parent_data in prev:
            first_attr = ipairs[-1][0] + 1 if ipairs else 0
            for a in range(first_attr, n_attrs):
                col = codes[parent_data, a]
                for t in range(tag_counts[a]):
                    child_data = parent_data[col == t]
                    if child_data.size >= cfg.min_count:
                        key = _public_key(index, ipairs + ((a, t),))
                        out[key] = Slice(
                            pairs=key,
                            members=bitvec.pack_indices(child_data, n),
                            count=int(child_data.size),
                        )
                    if not last:
                        # Expansion sources are kept unfiltered: the size
                        # filter never cuts the tree itself.
                        cur.append((ipairs + ((a, t),), child_data))
        prev = cur
    return out


def _matched_pair_buckets(
    keys: Sequence[tuple],
) -> Iterator[tuple[int, int, tuple]]:
    """Yield (i, j, merged_pairs) for every matched pair in a layer.

    Hash buckets are keyed by the (k-1)-subset left after deleting each
    pair in turn; two slices collide in exactly one bucket iff they
    agree on all but one pair.  Colliding slices whose odd pairs name
    the same attribute are skipped: one sample cannot carry two tags for
    one attribute, so that intersection is empty by construction.
    """
    buckets: dict[tuple, list[tuple[int, tuple]]] = {}
    for idx, pairs in enumerate(keys):
        for i in range(len(pairs)):
            buckets.setdefault(pairs[:i] + pairs[i + 1 :], []).append((idx, pairs[i]))
    for subset, entries in buckets.items():
        if len(entries) < 2:
            continue
        for (i1, p1), (i2, p2) in combinations(entries, 2):
            if p1[0] == p2[0]:
                continue
            yield i1, i2, tuple(sorted(subset + (p1, p2)))


def match_pairs(layer: Sequence[Slice]) -> Iterator[tuple[Slice, Slice]]:
    """All unordered pairs of same-depth slices differing in exactly one attribute.

    Each matched pair generates one depth-(k+1) candidate; every valid
    pair is yielded exactly once.
    """
    keys = [s.pairs for s in layer]
    for i, j, _ in _matched_pair_buckets(keys):
        yield layer[i], layer[j]


def intersect_candidate(
    s1: Slice,
    s2: Slice,
    all_parents_alive: Callable[[SliceKey], bool],
    min_count: int = 1,
) -> Optional[Slice]:
    """Build the candidate formed by a matched pair, or nothing.

    The candidate's members are the intersection of the two generators.
    It is kept only if every one of its parents survived pruning and its
    own count clears the floor; a dead parent vetoes the candidate even
    when the intersection itself would be large enough.
    """
    pairs = tuple(sorted(set(s1.pairs) | set(s2.pairs)))
    if len(pairs) != len(s1.pairs) + 1:
        raise ValueError("slices are not a matched pair")
    for i in range(len(pairs)):
        if not all_parents_alive(pairs[:i] + pairs[i + 1 :]):
            return None
    members = bitvec.intersect(s1.members, s2.members)
    count = bitvec.popcount(members)
    if count < min_count:
        return None
    return Slice(pairs=pairs, members=members, count=count)


def enumerate_efficient(index: IndicatorIndex, cfg: EnumConfig) -> SliceLattice:
    """Pruned matched-pair enumeration; returns the layered lattice.

    Depth-k candidates come only from intersecting surviving matched
    pairs of depth k-1, deduplicated by canonical key, and are admitted
    only when all k parents survived and the intersection has at least
    ``min_count`` members.  A layer's surviving bit-vectors are stacked
    into one matrix so the whole candidate batch is intersected and
    popcounted in a few array operations.
    """
    n = index.n_samples
    started = time.perf_counter()
    stats = EnumStats(algorithm="efficient", seconds=0.0)

    # Depth 1: marginal tag slices straight from the indicator vectors.
    t0 = time.perf_counter()
    pairs_1 = [
        ((a, t),)
        for a, attr in enumerate(index.schema.attributes)
        for t in range(len(attr.tags))
    ]
    bits_1 = np.stack([index.vector(a, t) for ((a, t),) in pairs_1])
    counts_1 = np.bitwise_count(bits_1).sum(axis=1, dtype=np.int64)
    keep = counts_1 >= cfg.min_count
    layer_keys = [p for p, k in zip(pairs_1, keep) if k]
    layer_bits = bits_1[keep]
    layer_counts = counts_1[keep]
    layers_internal: list[tuple[list[tuple], np.ndarray, np.ndarray]] = [
        (layer_keys, layer_bits, layer_counts)
    ]
    stats.layers.append(
        LayerStats(
            depth=1,
            candidates=len(pairs_1),
            survivors=len(layer_keys),
            seconds=time.perf_counter() - t0,
        )
    )

    for depth in range(2, cfg.max_depth + 1):
        t0 = time.perf_counter()
        row_of = {key: i for i, key in enumerate(layer_keys)}
        cand_keys: list[tuple] = []
        src_i: list[int] = []
        src_j: list[int] = []
        seen: set[tuple] = set()
        check_parents = depth > 2  # at depth 2 the generators are the only parents
        for i, j, merged in _matched_pair_buckets(layer_keys):
            if merged in seen:
                continue
            seen.add(merged)
            if check_parents:
                alive = True
                for d in range(len(merged)):
                    if merged[:d] + merged[d + 1 :] not in row_of:
                        alive = False
                        break
                if not alive:
                    continue
            cand_keys.append(merged)
            src_i.append(i)
            src_j.append(j)

        kept_keys: list[tuple] = []
        kept_bits: list[np.ndarray] = []
        kept_counts: list[np.ndarray] = []
        chunk = 65536

        def evaluate(lo: int) -> tuple[np.ndarray, np.ndarray]:
            ii = np.array(src_i[lo : lo + chunk], dtype=np.int64)
            jj = np.array(src_j[lo : lo + chunk], dtype=np.int64)
            bits = layer_bits[ii] & layer_bits[jj]
            counts = np.bitwise_count(bits).sum(axis=1, dtype=np.int64)
            return bits, counts

        offsets = range(0, len(cand_keys), chunk)
        if cfg.threads > 1 and len(cand_keys) > chunk:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                evaluated = list(pool.map(evaluate, offsets))
        else:
            evaluated = [evaluate(lo) for lo in offsets]
        for lo, (bits, counts) in zip(offsets, evaluated):
            ok = counts >= cfg.min_count
            kept_bits.append(bits[ok])
            kept_counts.append(counts[ok])
            kept_keys.extend(cand_keys[lo + p] for p in np.flatnonzero(ok))

        layer_keys = kept_keys
        layer_bits = (
            np.concatenate(kept_bits) if kept_bits else np.empty((0, bits_1.shape[1]), np.uint8)
        )
        layer_counts = (
            np.concatenate(kept_counts) if kept_counts else np.empty(0, np.int64)
        )
        layers_internal.append((layer_keys, layer_bits, layer_counts))
        stats.layers.append(
            LayerStats(
                depth=depth,
                candidates=len(seen),
                survivors=len(layer_keys),
                seconds=time.perf_counter() - t0,
            )
        )
        if not layer_keys:
            for d in range(depth + 1, cfg.max_depth + 1):
                layers_internal.append(([], layer_bits[:0], layer_counts[:0]))
                stats.layers.append(LayerStats(depth=d, candidates=0, survivors=0, seconds=0.0))
            break

    layers: list[list[Slice]] = []
    for keys, bits, counts in layers_internal:
        layers.append(
            [
                Slice(pairs=_public_key(index, ipairs), members=bits[i], count=int(counts[i]))
                for i, ipairs in enumerate(keys)
            ]
        )
    stats.seconds = time.perf_counter() - started
    return SliceLattice(n_samples=n, config=cfg, layers=layers, stats=stats)
