"""Packed membership bit-vectors.

Slice member sets are stored as bit-vectors packed into uint8 words
(big-endian bit order, numpy's packbits convention).  Intersection is a
word-wise AND and counting is a vectorized popcount, so the cost of
counting a slice is O(N/8) bytes instead of O(N) sample visits.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "pack",
    "pack_indices",
    "unpack",
    "indices",
    "popcount",
    "intersect",
    "full",
    "empty",
    "rle_encode",
    "rle_decode",
]


def pack(mask: np.ndarray) -> np.ndarray:
    """Pack a boolean mask into a uint8 bit-vector."""
    return np.packbits(np.asarray(mask, dtype=bool))


def pack_indices(idx: np.ndarray, n: int) -> np.ndarray:
    """Pack a sorted array of member positions into a length-n bit-vector."""
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return np.packbits(mask)


def unpack(bits: np.ndarray, n: int) -> np.ndarray:
    """Unpack a bit-vector back into a boolean mask of length n."""
    return np.unpackbits(bits, count=n).view(bool)


def indices(bits: np.ndarray, n: int) -> np.ndarray:
    """Member positions (sorted int64 array) of a bit-vector."""
    return np.flatnonzero(unpack(bits, n))


def popcount(bits: np.ndarray) -> int:
    """Number of set bits."""
    return int(np.bitwise_count(bits).sum())


def intersect(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.bitwise_and(a, b)


def full(n: int) -> np.ndarray:
    """Bit-vector with all n members present."""
    return np.packbits(np.ones(n, dtype=bool))


def empty(n: int) -> np.ndarray:
    return np.packbits(np.zeros(n, dtype=bool))


def rle_encode(bits: np.ndarray, n: int) -> list[int]:
    """Run-length encode the set bits as a flat [start, length, ...] list.

    Runs are maximal stretches of consecutive member positions; the flat
    form keeps serialized lattices compact for both sparse and dense
    slices.
    """
    idx = indices(bits, n)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    out: list[int] = []
    for s, e in zip(starts, ends):
        out.append(int(idx[s]))
        out.append(int(e - s + 1))
    return out


def rle_decode(runs: list[int], n: int) -> np.ndarray:
    """Inverse of rle_encode; returns the packed bit-vector."""
    mask = np.zeros(n, dtype=bool)
    for i in range(0, len(runs), 2):
        start, length = runs[i], runs[i + 1]
        mask[start : start + length] = True
    return np.packbits(mask)
