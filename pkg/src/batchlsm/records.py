"""Packed key encoding and the columnar record container.

A key variable is a 32-bit word: the 31-bit original key shifted left by
one, with the low bit holding the status (1 = regular, 0 = tombstone).
Sorting on the full word therefore places a tombstone directly before a
regular record carrying the same original key.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

KEY_DTYPE = np.uint32
VALUE_DTYPE = np.uint32

#: Reserved original key used by cleanup padding records.
PLACEBO_KEY = (1 << 31) - 1
#: Largest key a user may insert or delete.
MAX_USER_KEY = PLACEBO_KEY - 1

REGULAR = 1
TOMBSTONE = 0


def pack(original_keys, status) -> np.ndarray:
    k = np.asarray(original_keys, dtype=np.uint32)
    s = np.asarray(status, dtype=np.uint32) & np.uint32(1)
    return (k << np.uint32(1)) | s


def original_key(packed) -> np.ndarray:
    return np.asarray(packed, dtype=np.uint32) >> np.uint32(1)


def status(packed) -> np.ndarray:
    return np.asarray(packed, dtype=np.uint32) & np.uint32(1)


PLACEBO_PACKED = int(pack(PLACEBO_KEY, TOMBSTONE))


@dataclass(frozen=True, eq=False)
class Records:
    """A run of records stored as two parallel ``uint32`` columns.

    ``keys`` holds packed key variables; ``values`` the payloads. Every
    primitive returns a new ``Records`` instead of mutating its inputs.
    """

    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        keys = np.ascontiguousarray(self.keys, dtype=KEY_DTYPE)
        values = np.ascontiguousarray(self.values, dtype=VALUE_DTYPE)
        if keys.shape != values.shape or keys.ndim != 1:
            raise ValueError("keys and values must be 1-d arrays of equal length")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)

    @classmethod
    def empty(cls) -> Records:
        return cls(np.empty(0, KEY_DTYPE), np.empty(0, VALUE_DTYPE))

    @classmethod
    def from_tuples(cls, items) -> Records:
        """Build from ``(original_key, is_regular, value)`` triples."""
        items = list(items)
        if not items:
            return cls.empty()
        k, s, v = zip(*items)
        return cls(pack(k, np.asarray(s, dtype=np.uint32)), np.asarray(v, dtype=VALUE_DTYPE))

    @classmethod
    def concat(cls, parts) -> Records:
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(np.concatenate([p.keys for p in parts]), np.concatenate([p.values for p in parts]))

    def __len__(self) -> int:
        return self.keys.shape[0]

    def take(self, index) -> Records:
        return Records(self.keys[index], self.values[index])

    def __getitem__(self, item) -> Records:
        if isinstance(item, slice):
            return Records(self.keys[item], self.values[item])
        return self.take(item)

    @cached_property
    def original_keys(self) -> np.ndarray:
        return self.keys >> np.uint32(1)

    @property
    def is_regular(self) -> np.ndarray:
        return (self.keys & np.uint32(1)).astype(bool)

    def to_tuples(self) -> list[tuple[int, int, int]]:
        return list(zip(self.original_keys.tolist(), (self.keys & 1).tolist(), self.values.tolist()))

    def equals(self, other: Records) -> bool:
        return np.array_equal(self.keys, other.keys) and np.array_equal(self.values, other.values)
