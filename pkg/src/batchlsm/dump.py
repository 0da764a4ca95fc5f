"""Line-oriented text dump of a structure, and the matching parser.

::

    lsm b=4 r=3
    level 0: 3:R:7 9:T:0 12:R:1 20:R:5
    level 1: ...

Each record is ``<original key>:<R|T>:<value>``. A sorted array writes ``sa``
in the header and its whole run as ``level 0``.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import DumpFormatError, InvariantViolation, LsmError
from .lsm import Lsm, LsmConfig, level_size
from .records import REGULAR, TOMBSTONE, Records, pack
from .sorted_array import SortedArray

_HEADER = re.compile(r"^(lsm|sa) b=(\d+) r=(\d+)$")
_LEVEL = re.compile(r"^level (\d+):(.*)$")


def _format_level(records: Records) -> str:
    status = np.where(records.is_regular, "R", "T")
    return " ".join(f"{k}:{s}:{v}" for k, s, v in zip(records.original_keys.tolist(), status, records.values.tolist()))


def dumps(structure) -> str:
    lines = [f"{structure.kind} b={structure.b} r={structure.r}"]
    if isinstance(structure, Lsm):
        for i in structure.full_level_indices():
            lines.append(f"level {i}: {_format_level(structure.levels[i])}")
    elif len(structure):
        lines.append(f"level 0: {_format_level(structure.records)}")
    return "\n".join(lines) + "\n"


def _parse_records(body: str) -> Records:
    keys, status, values = [], [], []
    for token in body.split():
        try:
            k, s, v = token.split(":")
            keys.append(int(k))
            values.append(int(v))
        except ValueError:
            raise DumpFormatError(f"bad record token {token!r}") from None
        if s not in ("R", "T"):
            raise DumpFormatError(f"bad status in {token!r}")
        status.append(REGULAR if s == "R" else TOMBSTONE)
    if any(k < 0 or k >= 1 << 31 for k in keys) or any(v < 0 or v >= 1 << 32 for v in values):
        raise DumpFormatError("key or value out of range")
    return Records(pack(keys, status), np.array(values, dtype=np.uint32))


def loads(text: str):
    """Rebuild an :class:`Lsm` or :class:`SortedArray` and validate it."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DumpFormatError("empty dump")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise DumpFormatError(f"bad header {lines[0]!r}")
    kind, b, r = m.group(1), int(m.group(2)), int(m.group(3))
    try:
        config = LsmConfig(b)
    except LsmError as exc:
        raise DumpFormatError(str(exc)) from None
    levels: dict[int, Records] = {}
    for line in lines[1:]:
        lm = _LEVEL.match(line.strip())
        if not lm:
            raise DumpFormatError(f"bad level line {line!r}")
        i = int(lm.group(1))
        if i in levels:
            raise DumpFormatError(f"level {i} listed twice")
        levels[i] = _parse_records(lm.group(2))

    if kind == "sa":
        if set(levels) - {0}:
            raise DumpFormatError("a sorted array has only level 0")
        out = SortedArray(config)
        out.records = levels.get(0, Records.empty())
        if out.r != r or len(out.records) != r * b:
            raise DumpFormatError("record count disagrees with header")
    else:
        out = Lsm(config)
        out.r = r
        out.levels = [None] * max(r.bit_length(), max(levels, default=-1) + 1)
        for i, recs in levels.items():
            if len(recs) != level_size(b, i):
                raise DumpFormatError(f"level {i} holds {len(recs)} records, expected {level_size(b, i)}")
            out.levels[i] = recs
    try:
        out.check_invariants()
    except InvariantViolation as exc:
        raise DumpFormatError(str(exc)) from None
    return out
