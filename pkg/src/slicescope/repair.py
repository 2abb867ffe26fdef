"""Data selection for model repair.

Given a ranked error-slice report and a tagged data pool, selection
walks the slices worst-first and claims the pool samples matching each
slice until the budget runs out.  For object-level tasks the pool rows
are per-object samples sharing an image-level group key; whole groups
are then ranked by their best-matching slice.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analyze import ErrorSliceReport
from .lattice import SliceKey
from .schema import TaggedDataset

logger = logging.getLogger(__name__)

PLAN_FORMAT_VERSION = "1"


@dataclass
class Selection:
    id: str
    slice_key: Optional[SliceKey]  # None for budget filled past all slices
    slice_avg_perf: Optional[float]


@dataclass
class RepairPlan:
    budget: int
    selections: list[Selection]
    grouped: bool = False

    def ids(self) -> list[str]:
        return [s.id for s in self.selections]

    def to_document(self) -> dict:
        return {
            "version": PLAN_FORMAT_VERSION,
            "kind": "repair-plan",
            "budget": self.budget,
            "grouped": self.grouped,
            "selections": [
                {
                    "id": s.id,
                    "slice_key": None if s.slice_key is None else [list(p) for p in s.slice_key],
                    "slice_avg_perf": s.slice_avg_perf,
                }
                for s in self.selections
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False)


def _slice_mask(pool: TaggedDataset, key: SliceKey) -> np.ndarray:
    mask = np.ones(len(pool), dtype=bool)
    for attribute, tag in key:
        try:
            j = pool.schema.index_of(attribute)
            code = pool.schema.attributes[j].tag_code(tag)
        except (KeyError, ValueError) as exc:
            raise ValueError(
                f"pool schema does not know slice pair ({attribute!r}, {tag!r})"
            ) from exc
        mask &= pool.codes[:, j] == code
    return mask


def prioritize_pool(
    report: ErrorSliceReport, pool: TaggedDataset, budget: int
) -> RepairPlan:
    """Select pool samples worst-slice-first.

    Slices are visited in report order; each contributes its matching,
    not-yet-claimed samples in pool id order.  A sample matching several
    error slices is claimed by the worst-ranked one only.  Budget left
    over after every slice is filled with the remaining pool samples in
    id order, so the plan always has min(budget, pool size) entries and
    plan(b) is a prefix of plan(b+1).
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if budget > len(pool):
        logger.warning(
            "budget %d exceeds pool size %d; plan covers the whole pool", budget, len(pool)
        )
    order = np.argsort(np.array(pool.ids, dtype=object), kind="stable")
    claimed = np.zeros(len(pool), dtype=bool)
    selections: list[Selection] = []
    limit = min(budget, len(pool))
    for entry in report.error_slices:
        if len(selections) >= limit:
            break
        mask = _slice_mask(pool, entry.key)
        for i in order:
            if len(selections) >= limit:
                break
            if mask[i] and not claimed[i]:
                claimed[i] = True
                selections.append(
                    Selection(
                        id=pool.samples[i].id,
                        slice_key=entry.key,
                        slice_avg_perf=entry.avg_perf,
                    )
                )
    for i in order:
        if len(selections) >= limit:
            break
        if not claimed[i]:
            claimed[i] = True
            selections.append(Selection(id=pool.samples[i].id, slice_key=None, slice_avg_perf=None))
    return RepairPlan(budget=budget, selections=selections)


def prioritize_groups(
    report: ErrorSliceReport,
    pool: TaggedDataset,
    budget: int,
    aggregation: str = "best_rank",
) -> RepairPlan:
    """Select whole groups (images) for object-level tasks.

    Every pool sample must carry a group key.  With the default
    aggregation a group is scored by the best (minimum) slice rank among
    its member objects, ties broken by more matching objects and then by
    group id; the "mean_rank" alternative averages member ranks instead,
    counting objects that match nothing as one rank past the end of the
    report.  Groups matching nothing fill any remaining budget in id
    order.
    """
    if aggregation not in ("best_rank", "mean_rank"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    groups = pool.groups()  # raises for samples without group keys
    n_slices = len(report.error_slices)
    # Per sample: rank of the worst-ranked slice it matches, or n_slices.
    sample_rank = np.full(len(pool), n_slices, dtype=np.int64)
    for rank in range(n_slices - 1, -1, -1):
        mask = _slice_mask(pool, report.error_slices[rank].key)
        sample_rank[mask] = rank

    scored: list[tuple] = []
    unmatched: list[str] = []
    for gid, members in groups.items():
        ranks = sample_rank[members]
        matching = int(np.count_nonzero(ranks < n_slices))
        if matching == 0:
            unmatched.append(gid)
            continue
        if aggregation == "best_rank":
            score = (int(ranks.min()), -matching, gid)
            best = int(ranks.min())
        else:
            score = (float(ranks.mean()), -matching, gid)
            best = int(ranks.min())
        scored.append((score, gid, best))
    scored.sort(key=lambda t: t[0])
    unmatched.sort()

    selections: list[Selection] = []
    limit = min(budget, len(groups))
    for _, gid, best in scored:
        if len(selections) >= limit:
            break
        entry = report.error_slices[best]
        selections.append(Selection(id=gid, slice_key=entry.key, slice_avg_perf=entry.avg_perf))
    for gid in unmatched:
        if len(selections) >= limit:
            break
        selections.append(Selection(id=gid, slice_key=None, slice_avg_perf=None))
    return RepairPlan(budget=budget, selections=selections, grouped=True)
