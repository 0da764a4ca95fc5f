"""Desk-scale experiments: insertion sweeps, query rates and cleanup.

Each ``run_*`` function returns a list of :class:`ExperimentRow`. Timing rows
are only produced after the run's results were cross-checked, so a
correctness failure raises instead of writing numbers.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .batch import Batch, pad_partial_batch
from .errors import LsmError, SpecInvalid
from .lsm import Lsm, LsmConfig, bulk_build, ffz
from .oracle import Oracle
from .records import MAX_USER_KEY, Records
from .sorted_array import SortedArray

CSV_HEADER = ("experiment", "structure", "b", "r", "metric", "value")
KEY_SPACE = 1 << 31


class CrossCheckFailed(LsmError):
    """A benchmarked structure disagreed with the reference answers."""


@dataclass
class WorkloadSpec:
    seed: int = 0
    n: int = 1 << 20
    b: int = 1 << 16
    exist_fraction: float = 1.0
    range_l: float = 8.0

    def validate(self) -> None:
        try:
            LsmConfig(self.b)
        except LsmError as exc:
            raise SpecInvalid(str(exc)) from None
        if self.n <= 0 or self.n % self.b:
            raise SpecInvalid(f"n={self.n} must be a positive multiple of b={self.b}")
        if not 0.0 <= self.exist_fraction <= 1.0:
            raise SpecInvalid("exist_fraction must lie in [0, 1]")
        if self.range_l < 1:
            raise SpecInvalid("range_l must be >= 1")


@dataclass(frozen=True)
class ExperimentRow:
    experiment: str
    structure: str
    b: int
    r: int
    metric: str
    value: float | int

    def fields(self) -> tuple[str, ...]:
        if isinstance(self.value, (int, np.integer)):
            value = str(int(self.value))
        else:
            value = f"{float(self.value):.6f}"
        return (self.experiment, self.structure, str(self.b), str(self.r), self.metric, value)


def write_csv(rows: Iterable[ExperimentRow], out=None) -> str | None:
    """Write rows to ``out`` (path or text stream); return the text if ``out`` is None."""
    buf = io.StringIO() if out is None else None
    if isinstance(out, str):
        fh = open(out, "w", encoding="utf-8", newline="")
    else:
        fh = out if out is not None else buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow(row.fields())
    finally:
        if isinstance(out, str):
            fh.close()
    return buf.getvalue() if buf is not None else None


def hmean(rates: Sequence[float]) -> float:
    return statistics.harmonic_mean(rates) if len(rates) else 0.0


def distinct_keys(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` distinct keys drawn uniformly from the user key domain."""
    keys = np.unique(rng.integers(0, MAX_USER_KEY + 1, size=n, dtype=np.int64))
    while keys.size < n:
        extra = rng.integers(0, MAX_USER_KEY + 1, size=n - keys.size, dtype=np.int64)
        keys = np.unique(np.concatenate([keys, extra]))
    return rng.permutation(keys)


def _workload(spec: WorkloadSpec):
    rng = np.random.default_rng(spec.seed)
    keys = distinct_keys(rng, spec.n)
    values = rng.integers(0, 1 << 32, size=spec.n, dtype=np.int64)
    return rng, keys, values


def _make(structure: str, b: int):
    if structure == "lsm":
        return Lsm(b)
    if structure == "sa":
        return SortedArray(b)
    raise SpecInvalid(f"unknown structure {structure!r}")


def _sa_build(keys, values, b: int) -> SortedArray:
    sa = SortedArray(b)
    sa.records = Records.concat(bulk_build(Batch.inserts(keys, values), b).full_levels())
    return sa


def _warm_up(b: int) -> None:
    rng = np.random.default_rng(12345)
    for cls in (Lsm, SortedArray):
        s = cls(b)
        for _ in range(3):
            s.insert_batch(rng.integers(0, MAX_USER_KEY, b), np.zeros(b))
        s.lookup(rng.integers(0, MAX_USER_KEY, 64))
        s.count([0], [MAX_USER_KEY])


def _check_against_oracle(structure, oracle: Oracle, rng, probe_keys, n_ranges: int = 32) -> None:
    got = structure.lookup(probe_keys).as_list()
    if got != oracle.lookup_many(probe_keys):
        raise CrossCheckFailed(f"{structure.kind}: lookup disagrees with oracle")
    k1 = rng.integers(0, MAX_USER_KEY, n_ranges)
    k2 = np.minimum(k1 + rng.integers(0, KEY_SPACE // 64, n_ranges), MAX_USER_KEY)
    if not np.array_equal(structure.count(k1, k2), oracle.count_many(k1, k2)):
        raise CrossCheckFailed(f"{structure.kind}: count disagrees with oracle")


def _insert_trace(spec: WorkloadSpec, b: int, structure: str, keys, values):
    """Insert all batches, timing each; returns (dt list, merged delta list, structure)."""
    s = _make(structure, b)
    dts, merged = [], []
    for j in range(spec.n // b):
        batch = Batch.inserts(keys[j * b:(j + 1) * b], values[j * b:(j + 1) * b])
        before = s.counters.merged_records
        t0 = time.perf_counter()
        s.update_batch(batch)
        dts.append(max(time.perf_counter() - t0, 1e-9))
        delta = s.counters.merged_records - before
        if structure == "lsm" and delta != 2 * b * ((1 << ffz(j)) - 1):
            raise CrossCheckFailed(f"merge work {delta} at r={j} breaks 2b(2^ffz(r)-1)")
        merged.append(delta)
    r = spec.n // b
    if structure == "sa" and s.counters.merged_records != b * (r - 1) * (r + 2) // 2:
        raise CrossCheckFailed("sorted-array merge work differs from b(r-1)(r+2)/2")
    return dts, merged, s


def _verified_oracle(spec: WorkloadSpec, b: int, keys, values) -> Oracle:
    oracle = Oracle()
    for j in range(spec.n // b):
        oracle.apply_batch(Batch.inserts(keys[j * b:(j + 1) * b], values[j * b:(j + 1) * b]))
    return oracle


def run_insert_sweep(spec: WorkloadSpec, batch_sizes: Sequence[int] | None = None,
                     structures: Sequence[str] = ("lsm", "sa")) -> list[ExperimentRow]:
    """Insert ``n/b`` batches per batch size; per-batch time and merge work, plus rate summary."""
    spec.validate()
    rng, keys, values = _workload(spec)
    rows: list[ExperimentRow] = []
    for b in batch_sizes or [spec.b]:
        WorkloadSpec(spec.seed, spec.n, b).validate()
        _warm_up(b)
        oracle = _verified_oracle(spec, b, keys, values)
        for name in structures:
            dts, merged, s = _insert_trace(spec, b, name, keys, values)
            _check_against_oracle(s, oracle, rng, rng.choice(keys, 2000))
            for j, (dt, m) in enumerate(zip(dts, merged)):
                rows.append(ExperimentRow("insert-sweep", name, b, j + 1, "batch_ms", dt * 1e3))
                rows.append(ExperimentRow("insert-sweep", name, b, j + 1, "merged_records", m))
            rates = [b / dt for dt in dts]
            r = spec.n // b
            rows.append(ExperimentRow("insert-sweep", name, b, r, "min_rate", min(rates)))
            rows.append(ExperimentRow("insert-sweep", name, b, r, "max_rate", max(rates)))
            rows.append(ExperimentRow("insert-sweep", name, b, r, "hmean_rate", hmean(rates)))
    return rows


def run_effective_rate(spec: WorkloadSpec, batch_sizes: Sequence[int] | None = None,
                       structures: Sequence[str] = ("lsm", "sa")) -> list[ExperimentRow]:
    """After every batch: resident elements over cumulative insert time, and cumulative merge work."""
    spec.validate()
    rng, keys, values = _workload(spec)
    rows: list[ExperimentRow] = []
    for b in batch_sizes or [spec.b]:
        WorkloadSpec(spec.seed, spec.n, b).validate()
        _warm_up(b)
        oracle = _verified_oracle(spec, b, keys, values)
        for name in structures:
            dts, merged, s = _insert_trace(spec, b, name, keys, values)
            _check_against_oracle(s, oracle, rng, rng.choice(keys, 2000))
            elapsed = np.cumsum(dts)
            work = np.cumsum(merged)
            for j in range(len(dts)):
                r = j + 1
                rows.append(ExperimentRow("effective-rate", name, b, r, "effective_rate", r * b / elapsed[j]))
                rows.append(ExperimentRow("effective-rate", name, b, r, "cumulative_merged", int(work[j])))
    return rows


def range_span(range_l: float, resident: int) -> int:
    """Window width giving ``range_l`` expected resident keys under uniform density."""
    return math.ceil(range_l * KEY_SPACE / resident)


def query_arguments(kind: str, rng, resident_keys, taken: set, q: int, spec: WorkloadSpec):
    """Generate ``q`` queries: lookup keys, or ``(k1, k2)`` windows.

    Missing lookup keys avoid every key in ``taken``.
    """
    if kind == "lookup":
        n_exist = int(round(q * spec.exist_fraction))
        exist = rng.choice(resident_keys, n_exist)
        missing = []
        while len(missing) < q - n_exist:
            for k in rng.integers(0, MAX_USER_KEY + 1, q - n_exist).tolist():
                if k not in taken and len(missing) < q - n_exist:
                    missing.append(k)
        out = np.concatenate([exist, np.array(missing, dtype=np.int64)])
        return rng.permutation(out)
    k1 = rng.integers(0, MAX_USER_KEY + 1, q, dtype=np.int64)
    k2 = np.minimum(k1 + range_span(spec.range_l, resident_keys.size), MAX_USER_KEY)
    return k1, k2


def _run_query(structure, kind: str, args):
    if kind == "lookup":
        return structure.lookup(args)
    if kind == "count":
        return structure.count(*args)
    return structure.range(*args)


def _same_answer(kind: str, a, b) -> bool:
    if kind == "lookup":
        return np.array_equal(a.found, b.found) and np.array_equal(a.values[a.found], b.values[b.found])
    if kind == "count":
        return np.array_equal(a, b)
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _result_count(kind: str, result) -> int:
    """Found lookups, summed counts, or returned range pairs."""
    if kind == "lookup":
        return int(result.found.sum())
    if kind == "count":
        return int(result.sum())
    return int(result.keys.size)


def _checksum(kind: str, result) -> int:
    if kind == "lookup":
        return int(result.values[result.found].astype(np.int64).sum() % (1 << 32))
    if kind == "count":
        return int((result * np.arange(1, result.size + 1)).sum() % (1 << 32))
    return int((result.keys + result.values.astype(np.int64)).sum() % (1 << 32))


def _oracle_check(kind: str, oracle: Oracle, result, args, idx) -> bool:
    if kind == "lookup":
        expect = oracle.lookup_many(args[idx])
        got = result.as_list()
        return all(got[i] == e for i, e in zip(idx.tolist(), expect))
    k1, k2 = args
    if kind == "count":
        return np.array_equal(result[idx], oracle.count_many(k1[idx], k2[idx]))
    return all(result.pairs(int(i)) == oracle.range(int(k1[i]), int(k2[i])) for i in idx)


def run_query_bench(spec: WorkloadSpec, kind: str, r_values: Sequence[int] | None = None,
                    max_queries: int | None = None, structures: Sequence[str] = ("lsm", "sa"),
                    check_queries: int = 1000) -> list[ExperimentRow]:
    """Query rates over LSMs holding ``r`` resident batches, for each ``r`` in ``r_values``.

    Issues as many queries as resident elements (capped by ``max_queries``).
    The LSM answers are compared in full with the sorted array and on a
    sample of ``check_queries`` against the oracle before any row is kept.
    """
    if kind not in ("lookup", "count", "range"):
        raise SpecInvalid(f"unknown query kind {kind!r}")
    spec.validate()
    rng, keys, values = _workload(spec)
    b = spec.b
    r_max = spec.n // b
    r_values = sorted(set(r_values or range(1, r_max + 1)))
    if r_values[0] < 1 or r_values[-1] > r_max:
        raise SpecInvalid(f"r values must lie in [1, {r_max}]")
    _warm_up(b)
    lsm, oracle = Lsm(b), Oracle()
    taken = set(keys.tolist()) if kind == "lookup" and spec.exist_fraction < 1 else set()
    experiment = f"{kind}-bench"
    rows: list[ExperimentRow] = []
    rates: dict[str, list[float]] = {s: [] for s in structures}
    for r in r_values:
        while lsm.r < r:
            j = lsm.r
            batch = Batch.inserts(keys[j * b:(j + 1) * b], values[j * b:(j + 1) * b])
            lsm.update_batch(batch)
            oracle.apply_batch(batch)
        resident = keys[:r * b]
        q = min(r * b, max_queries or r * b)
        args = query_arguments(kind, rng, resident, taken, q, spec)
        built = {"lsm": lsm}
        if "sa" in structures:
            built["sa"] = _sa_build(resident, values[:r * b], b)
        answers, timings = {}, {}
        for name in structures:
            s = built[name]
            warm = args[:16] if kind == "lookup" else (args[0][:16], args[1][:16])
            _run_query(s, kind, warm)
            t0 = time.perf_counter()
            answers[name] = _run_query(s, kind, args)
            timings[name] = max(time.perf_counter() - t0, 1e-9)
        ref = answers[structures[0]]
        for name in structures[1:]:
            if not _same_answer(kind, ref, answers[name]):
                raise CrossCheckFailed(f"{kind}: {name} disagrees with {structures[0]} at r={r}")
        idx = rng.choice(q, min(q, check_queries), replace=False)
        if not _oracle_check(kind, oracle, ref, args, idx):
            raise CrossCheckFailed(f"{kind}: disagreement with oracle at r={r}")
        if kind == "lookup" and spec.exist_fraction in (0.0, 1.0):
            if not np.all(ref.found == (spec.exist_fraction == 1.0)):
                raise CrossCheckFailed("lookup existence scenario violated")
        for name in structures:
            rate = q / timings[name]
            rates[name].append(rate)
            rows.append(ExperimentRow(experiment, name, b, r, "rate", rate))
            rows.append(ExperimentRow(experiment, name, b, r, "result_count", _result_count(kind, answers[name])))
            rows.append(ExperimentRow(experiment, name, b, r, "checksum", _checksum(kind, answers[name])))
            if kind != "lookup":
                cand = built[name].candidate_counts(*args)
                rows.append(ExperimentRow(experiment, name, b, r, "mean_candidates", float(cand.mean())))
    for name in structures:
        rows.append(ExperimentRow(experiment, name, b, r_values[-1], "min_rate", min(rates[name])))
        rows.append(ExperimentRow(experiment, name, b, r_values[-1], "max_rate", max(rates[name])))
        rows.append(ExperimentRow(experiment, name, b, r_values[-1], "hmean_rate", hmean(rates[name])))
    return rows


def _lookup_fingerprint(res) -> tuple[np.ndarray, np.ndarray]:
    return res.found.copy(), np.where(res.found, res.values, 0)


def run_cleanup_bench(spec: WorkloadSpec, stale_fraction: float, max_queries: int | None = None
                      ) -> list[ExperimentRow]:
    """Build, make a fraction of records stale, then time cleanup against a rebuild.

    Half of the stale updates are deletes and half overwrite a live key.
    Queries are timed before and after cleanup and must give identical answers.
    """
    spec.validate()
    if not 0.0 <= stale_fraction < 1.0:
        raise SpecInvalid("stale_fraction must lie in [0, 1)")
    rng, keys, values = _workload(spec)
    b = spec.b
    _warm_up(b)
    lsm = bulk_build(Batch.inserts(keys, values), b)
    oracle = Oracle()
    oracle.apply_batch(Batch.inserts(keys, values))

    m = int(round(stale_fraction * spec.n / b)) * b
    targets = rng.choice(keys, m, replace=False)
    n_del = m // 2
    deletes = np.zeros(m, dtype=bool)
    deletes[:n_del] = True
    new_values = rng.integers(0, 1 << 32, size=m, dtype=np.int64)
    order = rng.permutation(m)
    targets, deletes, new_values = targets[order], deletes[order], new_values[order]
    for j in range(m // b):
        sl = slice(j * b, (j + 1) * b)
        batch = Batch(targets[sl], np.where(deletes[sl], 0, new_values[sl]), deletes[sl])
        lsm.update_batch(batch)
        oracle.apply_batch(batch)

    q = min(len(lsm), max_queries or len(lsm))
    probe = rng.choice(keys, q)
    k1 = rng.integers(0, MAX_USER_KEY + 1, 256, dtype=np.int64)
    k2 = np.minimum(k1 + range_span(spec.range_l, spec.n), MAX_USER_KEY)

    levels_before, r_before, records_before = len(lsm.full_levels()), lsm.r, len(lsm)
    lsm.lookup(probe[:16])
    t0 = time.perf_counter()
    before = lsm.lookup(probe)
    query_before = time.perf_counter() - t0
    count_before, range_before = lsm.count(k1, k2), lsm.range(k1, k2)

    t0 = time.perf_counter()
    lsm.cleanup()
    cleanup_time = time.perf_counter() - t0

    live = [(k, v) for k, (v, alive) in oracle.entries.items() if alive]
    t0 = time.perf_counter()
    if live:
        rebuilt_batch = pad_partial_batch(Batch.inserts([k for k, _ in live], [v for _, v in live]),
                                          -(-len(live) // b) * b)
        bulk_build(rebuilt_batch, b)
    rebuild_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    after = lsm.lookup(probe)
    query_after = time.perf_counter() - t0

    fb, fa = _lookup_fingerprint(before), _lookup_fingerprint(after)
    if not (np.array_equal(fb[0], fa[0]) and np.array_equal(fb[1], fa[1])):
        raise CrossCheckFailed("lookup answers changed across cleanup")
    if not np.array_equal(count_before, lsm.count(k1, k2)) or not _same_answer("range", range_before, lsm.range(k1, k2)):
        raise CrossCheckFailed("count/range answers changed across cleanup")
    sample = rng.choice(q, min(q, 2000), replace=False)
    if not _oracle_check("lookup", oracle, after, probe, sample):
        raise CrossCheckFailed("post-cleanup lookups disagree with oracle")

    r = lsm.r
    tag = "cleanup-bench"
    return [
        ExperimentRow(tag, "lsm", b, r_before, "stale_fraction", float(stale_fraction)),
        ExperimentRow(tag, "lsm", b, r_before, "records_before", records_before),
        ExperimentRow(tag, "lsm", b, r, "records_after", len(lsm)),
        ExperimentRow(tag, "lsm", b, r_before, "full_levels_before", levels_before),
        ExperimentRow(tag, "lsm", b, r, "full_levels_after", len(lsm.full_levels())),
        ExperimentRow(tag, "lsm", b, r, "cleanup_ms", cleanup_time * 1e3),
        ExperimentRow(tag, "lsm", b, r, "rebuild_ms", rebuild_time * 1e3),
        ExperimentRow(tag, "lsm", b, r_before, "query_before_ms", query_before * 1e3),
        ExperimentRow(tag, "lsm", b, r, "query_after_ms", query_after * 1e3),
    ]


def random_schedule(rng: np.random.Generator, b: int, n_batches: int, alphabet: int,
                    delete_prob: float) -> list[Batch]:
    """Mixed insert/delete batches over keys drawn from a small alphabet."""
    base = int(rng.integers(0, MAX_USER_KEY - alphabet + 1))
    batches = []
    for _ in range(n_batches):
        keys = base + rng.integers(0, alphabet, b)
        vals = rng.integers(0, 1 << 32, b, dtype=np.int64)
        dels = rng.random(b) < delete_prob
        batches.append(Batch(keys, np.where(dels, 0, vals), dels))
    return batches


def random_windows(rng: np.random.Generator, lo: int, alphabet: int, q: int):
    """Query windows over ``[lo, lo + alphabet)``: mostly narrow, one in ten spanning it all."""
    k1 = lo - 2 + rng.integers(0, alphabet + 4, q)
    narrow = rng.integers(0, max(1, alphabet // 16) + 1, q)
    wide = rng.integers(0, alphabet + 1, q)
    k2 = k1 + np.where(rng.random(q) < 0.1, wide, narrow)
    return k1, k2


def run_diff_test(seed: int = 0, schedules: int = 20, b: int = 256, max_batches: int = 64,
                  lookups: int = 1000, ranges: int = 100, cleanup: bool = True) -> list[ExperimentRow]:
    """Random mixed schedules; LSM, sorted array and oracle must agree after every batch."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    checks = 0
    for _ in range(schedules):
        alphabet = int(rng.choice([8, 64, 512, 4096]))
        batches = random_schedule(rng, b, int(rng.integers(1, max_batches + 1)), alphabet, float(rng.uniform(0, 0.6)))
        lsm, sa, oracle = Lsm(b), SortedArray(b), Oracle()
        lo = int(batches[0].keys.min())
        for batch in batches:
            lsm.update_batch(batch)
            sa.update_batch(batch)
            oracle.apply_batch(batch)
            probe = lo - 2 + rng.integers(0, alphabet + 4, lookups)
            expect = oracle.lookup_many(probe)
            k1, k2 = random_windows(rng, lo, alphabet, ranges)
            states = [lsm, sa]
            if cleanup and rng.random() < 0.1:
                snap = Lsm(b)
                snap.levels, snap.r = list(lsm.levels), lsm.r
                snap.cleanup()
                states.append(snap)
            for s in states:
                checks += 1
                ok = (s.lookup(probe).as_list() == expect
                      and np.array_equal(s.count(k1, k2), oracle.count_many(k1, k2)))
                rr = s.range(k1, k2)
                ok = ok and all(rr.pairs(i) == oracle.range(int(k1[i]), int(k2[i])) for i in range(ranges))
                mismatches += not ok
    return [
        ExperimentRow("diff-test", "all", b, 0, "checks", checks),
        ExperimentRow("diff-test", "all", b, 0, "mismatches", mismatches),
    ]
