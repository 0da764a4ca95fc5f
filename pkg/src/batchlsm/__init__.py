"""Batch-update LSM dictionary with a sorted-array baseline and a brute-force oracle."""

from .batch import Batch, Delete, Insert, UpdateEntry, pad_partial_batch
from .dump import dumps, loads
from .errors import (
    BatchSizeMismatch,
    DumpFormatError,
    EmptyBatch,
    InvalidConfig,
    InvalidRange,
    InvariantViolation,
    KeyOutOfDomain,
    LsmError,
    SizeNotMultipleOfBatch,
    SpecInvalid,
)
from .lsm import Lsm, LsmConfig, WorkCounters, bulk_build, create, ffz
from .oracle import Oracle
from .primitives import (
    SegmentLayout,
    exclusive_scan,
    lower_bound,
    merge_by_original_key,
    segmented_compact,
    segmented_sort_records,
    sort_records,
    upper_bound,
)
from .queries import LookupResult, RangeResult
from .records import MAX_USER_KEY, PLACEBO_KEY, Records
from .sorted_array import SortedArray

__version__ = "0.1.0"
