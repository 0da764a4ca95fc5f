"""Brute-force dictionary replaying update batches in order.

Ground truth for differential tests. It knows nothing about levels,
sorting or key packing: a plain mapping updated batch by batch.
"""

from __future__ import annotations

import numpy as np

from .batch import as_batch
from .errors import InvalidRange


class Oracle:
    def __init__(self):
        self.entries: dict[int, tuple[int, bool]] = {}
        self.batch_log: list = []
        self._alive = None

    def apply_batch(self, batch) -> None:
        batch = as_batch(batch)
        self.batch_log.append(batch)
        self._apply(self.entries, batch)
        self._alive = None

    @staticmethod
    def _apply(entries, batch) -> None:
        deleted = set()
        first = {}
        for key, value, dead in zip(batch.keys.tolist(), batch.values.tolist(), batch.delete.tolist()):
            if dead:
                deleted.add(key)
            elif key not in first:
                first[key] = value
        for key, value in first.items():
            if key not in deleted:
                entries[key] = (value, True)
        for key in deleted:
            entries[key] = (0, False)

    def replay(self) -> dict[int, tuple[int, bool]]:
        entries: dict[int, tuple[int, bool]] = {}
        for batch in self.batch_log:
            self._apply(entries, batch)
        return entries

    def lookup(self, key: int) -> int | None:
        value, alive = self.entries.get(int(key), (0, False))
        return value if alive else None

    def lookup_many(self, keys) -> list:
        return [self.lookup(k) for k in np.asarray(keys).ravel().tolist()]

    def _alive_arrays(self):
        """Live keys in ascending order with their values, cached until the next batch."""
        if self._alive is None:
            live = sorted((k, v) for k, (v, alive) in self.entries.items() if alive)
            keys = np.array([k for k, _ in live], dtype=np.int64)
            values = np.array([v for _, v in live], dtype=np.int64)
            self._alive = (keys, values)
        return self._alive

    def _window(self, k1, k2):
        k1 = np.asarray(k1, dtype=np.int64).ravel()
        k2 = np.asarray(k2, dtype=np.int64).ravel()
        if np.any(k1 > k2):
            raise InvalidRange("k1 > k2")
        keys, _ = self._alive_arrays()
        return np.searchsorted(keys, k1, side="left"), np.searchsorted(keys, k2, side="right")

    def count(self, k1: int, k2: int) -> int:
        lo, hi = self._window(k1, k2)
        return int(hi[0] - lo[0])

    def range(self, k1: int, k2: int) -> list[tuple[int, int]]:
        (lo,), (hi,) = self._window(k1, k2)
        keys, values = self._alive_arrays()
        return list(zip(keys[lo:hi].tolist(), values[lo:hi].tolist()))

    def count_many(self, k1, k2) -> np.ndarray:
        lo, hi = self._window(k1, k2)
        return (hi - lo).astype(np.int64)

    def range_many(self, k1, k2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat ``(offsets, keys, values)`` for many windows, like a range result."""
        lo, hi = self._window(k1, k2)
        keys, values = self._alive_arrays()
        sizes = hi - lo
        offsets = np.zeros(sizes.size, dtype=np.int64)
        np.cumsum(sizes[:-1], out=offsets[1:])
        idx = np.arange(int(sizes.sum()), dtype=np.int64) + np.repeat(lo - offsets, sizes)
        return offsets, keys[idx], values[idx]
