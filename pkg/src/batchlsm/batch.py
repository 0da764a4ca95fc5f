"""Update entries and their columnar batch form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BatchSizeMismatch, EmptyBatch, KeyOutOfDomain
from .records import MAX_USER_KEY, REGULAR, TOMBSTONE, Records, pack


class UpdateEntry(NamedTuple):
    key: int
    value: int = 0
    delete: bool = False


def Insert(key: int, value: int) -> UpdateEntry:
    return UpdateEntry(key, value, False)


def Delete(key: int) -> UpdateEntry:
    return UpdateEntry(key, 0, True)


@dataclass(frozen=True, eq=False)
class Batch:
    """Column form of a sequence of update entries."""

    keys: np.ndarray
    values: np.ndarray
    delete: np.ndarray

    def __post_init__(self):
        keys = np.asarray(self.keys, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=np.int64).ravel()
        delete = np.asarray(self.delete, dtype=bool).ravel()
        if not (keys.shape == values.shape == delete.shape):
            raise ValueError("batch columns must have equal length")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "delete", delete)

    @classmethod
    def inserts(cls, keys, values) -> Batch:
        keys = np.asarray(keys)
        return cls(keys, values, np.zeros(keys.shape, dtype=bool))

    @classmethod
    def deletes(cls, keys) -> Batch:
        keys = np.asarray(keys)
        return cls(keys, np.zeros(keys.shape, dtype=np.int64), np.ones(keys.shape, dtype=bool))

    @classmethod
    def from_entries(cls, entries: Sequence[UpdateEntry]) -> Batch:
        entries = list(entries)
        if not entries:
            return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, bool))
        k, v, d = zip(*entries)
        return cls(np.array(k, dtype=np.int64), np.array(v, dtype=np.int64), np.array(d, dtype=bool))

    def __len__(self) -> int:
        return self.keys.shape[0]

    def entries(self) -> list[UpdateEntry]:
        return [UpdateEntry(int(k), int(v), bool(d))
                for k, v, d in zip(self.keys, self.values, self.delete)]

    def check_domain(self) -> None:
        if len(self) and (self.keys.min() < 0 or self.keys.max() > MAX_USER_KEY):
            raise KeyOutOfDomain(f"keys must lie in [0, {MAX_USER_KEY}]")
        if len(self) and (self.values.min() < 0 or self.values.max() >= 1 << 32):
            raise ValueError("values must fit in 32 unsigned bits")

    def encode(self) -> Records:
        """Pack into records; deletes become tombstones with value 0."""
        status = np.where(self.delete, TOMBSTONE, REGULAR)
        values = np.where(self.delete, 0, self.values)
        return Records(pack(self.keys, status), values)


def as_batch(batch) -> Batch:
    if isinstance(batch, Batch):
        return batch
    return Batch.from_entries(batch)


def pad_partial_batch(entries, b: int):
    """Pad a short batch to ``b`` entries by repeating its last entry.

    Accepts either a :class:`Batch` or a list of :class:`UpdateEntry` and
    returns the same kind.
    """
    n = len(entries)
    if n == 0:
        raise EmptyBatch("cannot pad an empty batch")
    if n > b:
        raise BatchSizeMismatch(f"{n} entries exceed batch size {b}")
    if n == b:
        return entries
    if isinstance(entries, Batch):
        idx = np.concatenate([np.arange(n), np.full(b - n, n - 1)])
        return Batch(entries.keys[idx], entries.values[idx], entries.delete[idx])
    entries = list(entries)
    return entries + [entries[-1]] * (b - n)
