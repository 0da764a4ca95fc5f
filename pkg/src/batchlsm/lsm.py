"""The batched LSM dictionary.

Level ``i`` is either empty or holds exactly ``b * 2**i`` records, and it is
full exactly when bit ``i`` of the resident batch count ``r`` is set.
Inserting a batch is a binary increment of ``r``: every carry is a merge.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import queries
from .batch import Batch, as_batch
from .errors import (
    BatchSizeMismatch,
    InvalidConfig,
    InvariantViolation,
    LsmError,
    SizeNotMultipleOfBatch,
)
from .primitives import merge_by_original_key, sort_records
from .records import PLACEBO_PACKED, Records


@dataclass(frozen=True)
class LsmConfig:
    b: int

    def __post_init__(self):
        b = self.b
        if not isinstance(b, (int, np.integer)) or b < 2 or b & (b - 1):
            raise InvalidConfig(f"batch size must be a power of two >= 2, got {b!r}")


@dataclass
class WorkCounters:
    sorted_records: int = 0
    merged_records: int = 0
    compacted_records: int = 0


def ffz(r: int) -> int:
    """Index of the least significant zero bit of ``r``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    return ((r + 1) & ~r).bit_length() - 1


def level_size(b: int, i: int) -> int:
    return b << i


class Lsm:
    """Dictionary of 31-bit keys to 32-bit values updated in batches of ``b``.

    Mutating methods need exclusive access. ``lookup``, ``count`` and
    ``range`` only read and may run concurrently between mutations.
    """

    kind = "lsm"

    def __init__(self, config: LsmConfig | int):
        if not isinstance(config, LsmConfig):
            config = LsmConfig(config)
        self.config = config
        self.r = 0
        self.levels: list[Records | None] = []
        self.counters = WorkCounters()

    @property
    def b(self) -> int:
        return self.config.b

    def __len__(self) -> int:
        return self.r * self.b

    def __repr__(self) -> str:
        return f"Lsm(b={self.b}, r={self.r}, full_levels={self.full_level_indices()})"

    def full_level_indices(self) -> list[int]:
        return [i for i, lvl in enumerate(self.levels) if lvl is not None]

    def full_levels(self) -> list[Records]:
        """Occupied levels, smallest (most recent) first."""
        return [lvl for lvl in self.levels if lvl is not None]

    def stats(self) -> WorkCounters:
        return replace(self.counters)

    # -- updates ---------------------------------------------------------

    def update_batch(self, batch) -> None:
        batch = as_batch(batch)
        if len(batch) != self.b:
            raise BatchSizeMismatch(f"batch has {len(batch)} entries, expected {self.b}")
        batch.check_domain()
        buffer = sort_records(batch.encode())
        self.counters.sorted_records += len(buffer)
        self._cascade(buffer)

    def delete_batch(self, keys) -> None:
        self.update_batch(Batch.deletes(np.asarray(keys)))

    def insert_batch(self, keys, values) -> None:
        self.update_batch(Batch.inserts(np.asarray(keys), values))

    def _cascade(self, buffer: Records) -> None:
        # buffer is newer than every resident level, so it is merged as `newer`
        i = 0
        while i < len(self.levels) and self.levels[i] is not None:
            level = self.levels[i]
            self.counters.merged_records += len(buffer) + len(level)
            buffer = merge_by_original_key(buffer, level)
            self.levels[i] = None
            i += 1
        if i == len(self.levels):
            self.levels.append(None)
        self.levels[i] = buffer
        self.r += 1

    def _redistribute(self, run: Records, r: int) -> None:
        """Slice a sorted run into the levels implied by the set bits of ``r``.

        Smaller levels receive the smaller keys.
        """
        if len(run) != r * self.b:
            raise LsmError("run length does not match r * b")
        self.levels = [None] * r.bit_length()
        start = 0
        for i in range(r.bit_length()):
            if r >> i & 1:
                size = level_size(self.b, i)
                self.levels[i] = run[start:start + size]
                start += size
        self.r = r

    # -- queries ---------------------------------------------------------

    def lookup(self, keys) -> queries.LookupResult:
        return queries.lookup(self.full_levels(), keys)

    def get(self, key: int) -> int | None:
        return self.lookup([key]).as_list()[0]

    def count(self, k1, k2) -> np.ndarray:
        return queries.count(self.full_levels(), k1, k2)

    def range(self, k1, k2) -> queries.RangeResult:
        return queries.range_query(self.full_levels(), k1, k2)

    def candidate_counts(self, k1, k2) -> np.ndarray:
        return queries.candidate_counts(self.full_levels(), k1, k2)

    # -- maintenance -----------------------------------------------------

    def cleanup(self) -> None:
        """Drop tombstones and stale records, pad with placebos, re-slice."""
        full = self.full_levels()
        if not full:
            return
        run = full[0]
        for level in full[1:]:
            self.counters.merged_records += len(run) + len(level)
            run = merge_by_original_key(run, level)
        ok = run.original_keys
        first = np.ones(len(run), dtype=bool)
        first[1:] = ok[1:] != ok[:-1]
        keep = first & run.is_regular
        self.counters.compacted_records += len(run)
        survivors = run.take(np.flatnonzero(keep))
        n = len(survivors)
        if n == 0:
            self.levels = []
            self.r = 0
            return
        pad = -n % self.b
        if pad:
            survivors = Records.concat([
                survivors,
                Records(np.full(pad, PLACEBO_PACKED, dtype=np.uint32), np.zeros(pad, dtype=np.uint32)),
            ])
        self._redistribute(survivors, len(survivors) // self.b)

    def check_invariants(self) -> None:
        """Raise :class:`InvariantViolation` if the level structure is broken."""
        bits = self.r.bit_length()
        if any(lvl is not None for lvl in self.levels[bits:]):
            raise InvariantViolation("full level beyond the highest bit of r")
        total = 0
        for i, lvl in enumerate(self.levels):
            full = lvl is not None
            if full != bool(self.r >> i & 1):
                raise InvariantViolation(f"level {i} occupancy disagrees with r={self.r}")
            if not full:
                continue
            if len(lvl) != level_size(self.b, i):
                raise InvariantViolation(f"level {i} holds {len(lvl)} records")
            ok = lvl.original_keys
            if np.any(ok[1:] < ok[:-1]):
                raise InvariantViolation(f"level {i} is not sorted by original key")
            tomb = ~lvl.is_regular
            if np.any(lvl.values[tomb] != 0):
                raise InvariantViolation(f"level {i} has a tombstone with a nonzero value")
            total += len(lvl)
        if total != self.r * self.b:
            raise InvariantViolation("resident record count differs from r * b")


def create(config: LsmConfig | int) -> Lsm:
    return Lsm(config)


def bulk_build(entries, config: LsmConfig | int) -> Lsm:
    """Build from ``k * b`` insert entries with one global sort.

    Answers match feeding consecutive ``b``-sized slices to
    :meth:`Lsm.update_batch`: a later slice overrides an earlier one, and
    inside a slice the first occurrence of a key wins.
    """
    lsm = Lsm(config)
    batch = as_batch(entries)
    n = len(batch)
    if n % lsm.b:
        raise SizeNotMultipleOfBatch(f"{n} entries is not a multiple of b={lsm.b}")
    if np.any(batch.delete):
        raise LsmError("bulk_build accepts insert entries only")
    batch.check_domain()
    if n == 0:
        return lsm
    pos = np.arange(n)
    order = np.lexsort((pos, -(pos // lsm.b), batch.keys))
    run = batch.encode().take(order)
    lsm.counters.sorted_records += n
    lsm._redistribute(run, n // lsm.b)
    return lsm
