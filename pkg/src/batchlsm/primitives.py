"""Bulk building blocks: sort, merge, bounds, scan, segmented sort/compact.

All functions are pure. Inputs are never modified and results are always
freshly allocated, so the same inputs give bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .records import Records


@dataclass(frozen=True, eq=False)
class SegmentLayout:
    """Start offsets of consecutive segments over ``total`` records."""

    offsets: np.ndarray
    total: int

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.int64)
        if offsets.ndim != 1:
            raise ValueError("offsets must be 1-d")
        if offsets.size:
            if offsets[0] != 0:
                raise ValueError("first segment must start at 0")
            if np.any(np.diff(offsets) < 0) or offsets[-1] > self.total:
                raise ValueError("offsets must be nondecreasing and within total")
        elif self.total:
            raise ValueError("records without any segment")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "total", int(self.total))

    @classmethod
    def from_sizes(cls, sizes) -> SegmentLayout:
        sizes = np.asarray(sizes, dtype=np.int64)
        return cls(exclusive_scan(sizes), int(sizes.sum()))

    def __len__(self) -> int:
        return self.offsets.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(np.append(self.offsets, self.total))

    @cached_property
    def _ids(self) -> np.ndarray:
        return np.repeat(np.arange(len(self), dtype=np.int64), self.sizes)

    def segment_ids(self) -> np.ndarray:
        """Segment index of every record position."""
        return self._ids


def sort_records(records: Records) -> Records:
    """Stable sort on the full packed key, status bit included."""
    order = np.argsort(records.keys, kind="stable")
    return records.take(order)


def merge_by_original_key(newer: Records, older: Records) -> Records:
    """Merge two runs sorted by original key, ignoring the status bit.

    On equal original keys every record of ``newer`` lands before every
    record of ``older``; each input keeps its internal order.
    """
    nk = newer.original_keys
    ok = older.original_keys
    # output slot = own rank + number of records from the other run that precede it
    pos_new = np.arange(nk.size, dtype=np.int64) + np.searchsorted(ok, nk, side="left")
    pos_old = np.arange(ok.size, dtype=np.int64) + np.searchsorted(nk, ok, side="right")
    keys = np.empty(nk.size + ok.size, dtype=newer.keys.dtype)
    values = np.empty_like(keys)
    keys[pos_new] = newer.keys
    keys[pos_old] = older.keys
    values[pos_new] = newer.values
    values[pos_old] = older.values
    return Records(keys, values)


def _as_sorted_keys(level) -> np.ndarray:
    if isinstance(level, Records):
        return level.original_keys
    return np.asarray(level)


def search(sorted_keys: np.ndarray, k, *, right: bool = False) -> tuple[np.ndarray, int]:
    """Branchless binary search run in lockstep over a vector of probes.

    Returns ``(index, probes)`` where ``probes`` is the number of element
    reads each query made, ``ceil(log2(n)) + 1`` for a nonempty level.
    """
    q = np.asarray(k, dtype=np.int64)
    base = np.zeros(q.shape, dtype=np.int64)
    n = int(sorted_keys.shape[0])
    if n == 0:
        return base, 0
    probes = 0
    while n > 1:
        half = n >> 1
        mid = sorted_keys[base + half]
        go = (mid <= q) if right else (mid < q)
        base += half * go
        n -= half
        probes += 1
    last = sorted_keys[base]
    base += (last <= q) if right else (last < q)
    return base, probes + 1


def lower_bound(level, k):
    """First index whose original key is ``>= k`` (``len`` if none).

    ``level`` is a :class:`Records` run or an array of original keys; ``k``
    may be a scalar or an array of keys.
    """
    idx, _ = search(_as_sorted_keys(level), k)
    return int(idx) if idx.ndim == 0 else idx


def upper_bound(level, k):
    """First index whose original key is ``> k`` (``len`` if none)."""
    idx, _ = search(_as_sorted_keys(level), k, right=True)
    return int(idx) if idx.ndim == 0 else idx


def exclusive_scan(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    out = np.zeros(counts.shape, dtype=np.int64)
    if counts.size > 1:
        np.cumsum(counts[:-1], out=out[1:])
    return out


def segmented_sort_records(records: Records, layout: SegmentLayout, segment_ids=None) -> Records:
    """Stable sort by original key inside each segment; segments never mix.

    By default ``records`` are already grouped by segment as ``layout``
    describes. Passing ``segment_ids`` tags every record with its segment
    instead, in any order; the output is then grouped to match ``layout``.
    """
    if len(records) != layout.total:
        raise ValueError("layout does not cover the records")
    if segment_ids is None:
        segment_ids = layout.segment_ids()
    elif np.shape(segment_ids) != (len(records),):
        raise ValueError("one segment id per record")
    seg = np.asarray(segment_ids).astype(np.uint64)
    composite = (seg << np.uint64(32)) | records.original_keys.astype(np.uint64)
    order = np.argsort(composite, kind="stable")
    return records.take(order)


def segmented_compact(records: Records, valid, layout: SegmentLayout) -> tuple[Records, np.ndarray]:
    """Keep flagged records, in order, and report survivors per segment."""
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (len(records),) or len(records) != layout.total:
        raise ValueError("valid flags and layout must cover the records")
    seg = layout.segment_ids()
    counts = np.bincount(seg[valid], minlength=len(layout)).astype(np.int64)
    return records.take(np.flatnonzero(valid)), counts
