"""Single sorted run maintained by merging each new batch into the whole array.

Shares record encoding and query semantics with :class:`~batchlsm.lsm.Lsm`,
including tombstones and stale records, so both answer identically.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import queries
from .batch import Batch, as_batch
from .errors import BatchSizeMismatch, InvariantViolation
from .lsm import LsmConfig, WorkCounters
from .primitives import merge_by_original_key, sort_records
from .records import Records


class SortedArray:
    kind = "sa"

    def __init__(self, config: LsmConfig | int):
        if not isinstance(config, LsmConfig):
            config = LsmConfig(config)
        self.config = config
        self.records = Records.empty()
        self.counters = WorkCounters()

    @property
    def b(self) -> int:
        return self.config.b

    @property
    def r(self) -> int:
        return len(self.records) // self.b

    def __len__(self) -> int:
        return len(self.records)

    def __repr__(self) -> str:
        return f"SortedArray(b={self.b}, r={self.r})"

    def full_levels(self) -> list[Records]:
        return [self.records] if len(self.records) else []

    def stats(self) -> WorkCounters:
        return replace(self.counters)

    def update_batch(self, batch) -> None:
        batch = as_batch(batch)
        if len(batch) != self.b:
            raise BatchSizeMismatch(f"batch has {len(batch)} entries, expected {self.b}")
        batch.check_domain()
        run = sort_records(batch.encode())
        self.counters.sorted_records += len(run)
        if len(self.records):
            self.counters.merged_records += len(self.records) + len(run)
            run = merge_by_original_key(run, self.records)
        self.records = run

    def delete_batch(self, keys) -> None:
        self.update_batch(Batch.deletes(np.asarray(keys)))

    def insert_batch(self, keys, values) -> None:
        self.update_batch(Batch.inserts(np.asarray(keys), values))

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

    def check_invariants(self) -> None:
        ok = self.records.original_keys
        if len(self.records) % self.b:
            raise InvariantViolation("array length is not a multiple of b")
        if np.any(ok[1:] < ok[:-1]):
            raise InvariantViolation("array is not sorted by original key")
        if np.any(self.records.values[~self.records.is_regular] != 0):
            raise InvariantViolation("tombstone with a nonzero value")
