"""Read-only query engine over a stack of sorted levels.

``levels`` is always ordered most recent first. The LSM passes its full
levels by ascending index; the sorted array passes its single run. Queries
never touch mutable state, so concurrent calls are safe.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidRange
from .primitives import (
    SegmentLayout,
    exclusive_scan,
    search,
    segmented_compact,
    segmented_sort_records,
)
from .records import Records


class LookupResult(NamedTuple):
    """Vectorized lookup answer; ``values[i]`` is meaningful only if ``found[i]``."""

    found: np.ndarray
    values: np.ndarray
    probes: np.ndarray

    def as_list(self) -> list:
        """One ``int`` (found) or ``None`` (not found) per query."""
        return [int(v) if f else None for f, v in zip(self.found, self.values)]


class RangeResult(NamedTuple):
    offsets: np.ndarray
    keys: np.ndarray
    values: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.diff(np.append(self.offsets, self.keys.shape[0]))

    def pairs(self, q: int) -> list[tuple[int, int]]:
        lo = int(self.offsets[q])
        hi = int(self.offsets[q + 1]) if q + 1 < len(self.offsets) else self.keys.shape[0]
        return list(zip(self.keys[lo:hi].tolist(), self.values[lo:hi].tolist()))


def lookup(levels: Sequence[Records], keys) -> LookupResult:
    q = np.asarray(keys, dtype=np.int64).ravel()
    found = np.zeros(q.shape, dtype=bool)
    values = np.zeros(q.shape, dtype=np.uint32)
    probes = np.zeros(q.shape, dtype=np.int64)
    pending = np.arange(q.size)
    for level in levels:
        if pending.size == 0:
            break
        ok = level.original_keys
        idx, p = search(ok, q[pending])
        probes[pending] += p
        inside = idx < ok.size
        hit = np.zeros(pending.shape, dtype=bool)
        hit[inside] = ok[idx[inside]] == q[pending[inside]]
        rows = pending[hit]
        at = idx[hit]
        regular = (level.keys[at] & np.uint32(1)).astype(bool)
        found[rows] = regular
        values[rows] = np.where(regular, level.values[at], 0)
        pending = pending[~hit]
    return LookupResult(found, values, probes)


def _check_ranges(k1, k2) -> tuple[np.ndarray, np.ndarray]:
    k1 = np.asarray(k1, dtype=np.int64).ravel()
    k2 = np.asarray(k2, dtype=np.int64).ravel()
    if k1.shape != k2.shape:
        raise ValueError("k1 and k2 must have the same length")
    if np.any(k1 > k2):
        raise InvalidRange("every query needs k1 <= k2")
    return k1, k2


def candidate_bounds(levels: Sequence[Records], k1, k2) -> tuple[np.ndarray, np.ndarray]:
    """Per query and level, the ``[lower, upper)`` index window of candidates."""
    k1, k2 = _check_ranges(k1, k2)
    lo = np.zeros((k1.size, len(levels)), dtype=np.int64)
    hi = np.zeros_like(lo)
    for j, level in enumerate(levels):
        lo[:, j], _ = search(level.original_keys, k1)
        hi[:, j], _ = search(level.original_keys, k2, right=True)
    return lo, hi


def gather_candidates(levels: Sequence[Records], k1, k2) -> tuple[Records, SegmentLayout]:
    """Stages 1 to 4: bound, scan, gather and segment-sort the candidates.

    Candidates are gathered level by level, most recent level first, so the
    stable segmented sort leaves each equal-key run most recent first. Each
    level contributes a run already ordered by (query, key), which keeps the
    sort cheap.
    """
    lo, hi = candidate_bounds(levels, k1, k2)
    nq = lo.shape[0]
    counts = hi - lo
    keys, values, seg = [], [], []
    for j, level in enumerate(levels):
        c = counts[:, j]
        m = int(c.sum())
        if m == 0:
            continue
        # slice q of this level starts at lo[q]; shift arange(m) onto it
        src = np.arange(m, dtype=np.int64) + np.repeat(lo[:, j] - exclusive_scan(c), c)
        keys.append(level.keys[src])
        values.append(level.values[src])
        seg.append(np.repeat(np.arange(nq, dtype=np.int64), c))
    layout = SegmentLayout.from_sizes(counts.sum(axis=1))
    if not keys:
        return Records.empty(), layout
    cand = Records(np.concatenate(keys), np.concatenate(values))
    return segmented_sort_records(cand, layout, np.concatenate(seg)), layout


def _first_regular_of_run(cand: Records, layout: SegmentLayout) -> np.ndarray:
    seg = layout.segment_ids()
    ok = cand.original_keys
    first = np.ones(len(cand), dtype=bool)
    if len(cand) > 1:
        first[1:] = (seg[1:] != seg[:-1]) | (ok[1:] != ok[:-1])
    return first & cand.is_regular


def count(levels: Sequence[Records], k1, k2) -> np.ndarray:
    cand, layout = gather_candidates(levels, k1, k2)
    valid = _first_regular_of_run(cand, layout)
    return np.bincount(layout.segment_ids()[valid], minlength=len(layout)).astype(np.int64)


def range_query(levels: Sequence[Records], k1, k2) -> RangeResult:
    cand, layout = gather_candidates(levels, k1, k2)
    valid = _first_regular_of_run(cand, layout)
    kept, per_query = segmented_compact(cand, valid, layout)
    return RangeResult(exclusive_scan(per_query), kept.original_keys.astype(np.int64), kept.values)


def candidate_counts(levels: Sequence[Records], k1, k2) -> np.ndarray:
    """Stage-1 estimate: resident records inside each query window."""
    lo, hi = candidate_bounds(levels, k1, k2)
    return (hi - lo).sum(axis=1)
