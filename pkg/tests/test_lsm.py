import numpy as np
import pytest

from batchlsm import (
    Batch,
    BatchSizeMismatch,
    Delete,
    EmptyBatch,
    Insert,
    InvalidConfig,
    InvalidRange,
    KeyOutOfDomain,
    Lsm,
    LsmConfig,
    MAX_USER_KEY,
    Oracle,
    SizeNotMultipleOfBatch,
    bulk_build,
    create,
    ffz,
    pad_partial_batch,
    sort_records,
)
from batchlsm.bench import random_schedule, random_windows

A, B, C, D, E, F, G = 101, 102, 103, 104, 105, 106, 107


def example_state():
    lsm = Lsm(4)
    lsm.update_batch([Insert(3, A), Insert(7, B), Insert(9, C), Insert(12, D)])
    lsm.update_batch([Insert(3, E), Delete(9), Insert(20, F), Insert(21, G)])
    return lsm


def carry_merge_work(b, r):
    """Records merged by one insertion into r resident batches, walking the carry chain."""
    work, size, i = 0, b, 0
    while r >> i & 1:
        work += 2 * size
        size *= 2
        i += 1
    return work


# -- create / config ----------------------------------------------------------

def test_create_empty():
    lsm = create(LsmConfig(4))
    assert lsm.r == 0 and lsm.full_level_indices() == []
    big = create(1 << 20)
    assert big.stats().merged_records == 0 and big.stats().sorted_records == 0


@pytest.mark.parametrize("b", [0, 1, 3, 6, 100, -4])
def test_create_rejects_non_power_of_two(b):
    with pytest.raises(InvalidConfig):
        create(b)


@pytest.mark.parametrize("r, expected", [(5, 1), (3, 2), (0, 0), (1, 1), (6, 0), (7, 3), (2**10 - 1, 10)])
def test_ffz(r, expected):
    assert ffz(r) == expected


def test_ffz_against_bit_scan():
    for r in range(4096):
        i = 0
        while r >> i & 1:
            i += 1
        assert ffz(r) == i


# -- update_batch -------------------------------------------------------------

def test_insert_into_empty_lsm():
    lsm = Lsm(4)
    lsm.insert_batch([9, 1, 5, 3], [1, 2, 3, 4])
    assert lsm.r == 1 and lsm.full_level_indices() == [0]
    assert lsm.levels[0].original_keys.tolist() == [1, 3, 5, 9]
    assert lsm.stats().merged_records == 0
    assert lsm.stats().sorted_records == 4


def test_insert_at_r5_merges_level0_only():
    b = 4
    lsm = Lsm(b)
    for j in range(5):
        lsm.insert_batch(np.arange(b) + 10 * j, np.zeros(b))
    assert lsm.full_level_indices() == [0, 2]
    before = lsm.stats().merged_records
    lsm.insert_batch(np.arange(b) + 100, np.zeros(b))
    assert lsm.full_level_indices() == [1, 2]
    assert lsm.r == 6
    assert lsm.stats().merged_records - before == 2 * b


def test_insert_at_r3_merge_work():
    b = 8
    lsm = Lsm(b)
    for j in range(3):
        lsm.insert_batch(np.arange(b) + 10 * j, np.zeros(b))
    before = lsm.stats().merged_records
    lsm.insert_batch(np.arange(b), np.zeros(b))
    assert lsm.stats().merged_records - before == carry_merge_work(b, 3) == 6 * b


def test_cumulative_merge_work_matches_carry_walk():
    b = 2
    lsm = Lsm(b)
    total = 0
    for r in range(300):
        total += carry_merge_work(b, r)
        lsm.insert_batch([r, r + 1], [0, 0])
        assert lsm.stats().merged_records == total
        assert total == sum(2 * b * ((1 << ffz(j)) - 1) for j in range(r + 1))


def test_insert_and_delete_same_key_in_batch():
    lsm = Lsm(2)
    lsm.update_batch([Insert(5, A), Delete(5)])
    assert lsm.get(5) is None
    lsm.update_batch([Delete(6), Insert(6, A)])
    assert lsm.get(6) is None


def test_batch_errors():
    lsm = Lsm(4)
    with pytest.raises(BatchSizeMismatch):
        lsm.update_batch([Insert(1, 1)])
    with pytest.raises(KeyOutOfDomain):
        lsm.insert_batch([1, 2, 3, MAX_USER_KEY + 1], [0] * 4)
    with pytest.raises(KeyOutOfDomain):
        lsm.insert_batch([1, 2, 3, -1], [0] * 4)
    assert lsm.r == 0


def test_occupancy_and_size_after_every_insert(rng):
    b = 2
    lsm = Lsm(b)
    for r in range(1, 1025):
        lsm.insert_batch(rng.integers(0, 50, b), rng.integers(0, 9, b))
        assert lsm.r == r
        assert [i for i in range(r.bit_length()) if r >> i & 1] == lsm.full_level_indices()
        assert len(lsm) == r * b
    lsm.check_invariants()


def test_level_ordering_with_batch_tags(rng):
    """Equal-key runs are most recent batch first, tombstones first within a batch.

    Batches are fed through the cascade with their batch index stored as the
    value of every record (tombstones included) so the order can be audited.
    """
    b = 8
    lsm = Lsm(b)
    for tag in range(1, 200):
        keys = rng.integers(0, 6, b)
        status = rng.integers(0, 2, b)
        batch = Batch(keys, np.zeros(b), status == 0).encode()
        tagged = type(batch)(batch.keys, np.full(b, tag))
        lsm._cascade(sort_records(tagged))
        for level in lsm.full_levels():
            ok, tags, st = level.original_keys, level.values.astype(np.int64), (level.keys & 1)
            same = ok[1:] == ok[:-1]
            assert np.all(ok[1:] >= ok[:-1])
            assert np.all(tags[1:][same] <= tags[:-1][same])
            same_batch = same & (tags[1:] == tags[:-1])
            assert np.all(st[1:][same_batch] >= st[:-1][same_batch])


# -- delete_batch -------------------------------------------------------------

def test_delete_never_inserted_keys():
    lsm = Lsm(4)
    lsm.delete_batch([1, 2, 3, 4])
    assert lsm.r == 1
    assert lsm.levels[0].to_tuples() == [(k, 0, 0) for k in [1, 2, 3, 4]]
    assert lsm.lookup([1, 2, 3, 4]).as_list() == [None] * 4


def test_delete_after_insert():
    lsm = Lsm(2)
    lsm.update_batch([Insert(7, A), Insert(8, B)])
    lsm.delete_batch([7, 7])
    assert lsm.lookup([7, 8]).as_list() == [None, B]


def test_repeated_delete_same_as_single_delete(rng):
    b = 16
    keys = rng.integers(0, 40, b)
    repeated, single = Lsm(b), Lsm(b)
    for s in (repeated, single):
        s.insert_batch(keys, np.arange(b))
    repeated.delete_batch(np.full(b, keys[0]))
    single.update_batch(pad_partial_batch([Delete(int(keys[0]))], b))
    oracle = Oracle()
    oracle.apply_batch(Batch.inserts(keys, np.arange(b)))
    oracle.apply_batch([Delete(int(keys[0]))])
    probe = np.arange(-1, 42)
    assert repeated.lookup(probe).as_list() == single.lookup(probe).as_list() == oracle.lookup_many(probe)
    assert repeated.count([0], [50]).tolist() == single.count([0], [50]).tolist() == [oracle.count(0, 50)]


# -- pad_partial_batch --------------------------------------------------------

def test_pad_duplicates_last_entry():
    entries = [Insert(1, A), Insert(2, B), Insert(3, C)]
    assert pad_partial_batch(entries, 4) == entries + [Insert(3, C)]
    deletes = [Delete(1), Delete(2), Delete(3)]
    assert pad_partial_batch(deletes, 4)[-1] == Delete(3)


def test_pad_errors():
    with pytest.raises(EmptyBatch):
        pad_partial_batch([], 4)
    with pytest.raises(BatchSizeMismatch):
        pad_partial_batch([Insert(1, 1)] * 5, 4)


def test_pad_columnar_batch():
    batch = pad_partial_batch(Batch.inserts([5, 6], [1, 2]), 4)
    assert batch.keys.tolist() == [5, 6, 6, 6]


def test_padded_batches_match_unpadded_oracle(rng):
    b = 32
    lsm, oracle = Lsm(b), Oracle()
    for _ in range(40):
        n = int(rng.integers(1, b))
        keys = rng.integers(0, 60, n)
        dels = rng.random(n) < 0.3
        partial = Batch(keys, np.where(dels, 0, rng.integers(0, 1000, n)), dels)
        lsm.update_batch(pad_partial_batch(partial, b))
        oracle.apply_batch(partial)
        probe = np.arange(-1, 62)
        assert lsm.lookup(probe).as_list() == oracle.lookup_many(probe)
        k1, k2 = random_windows(rng, 0, 60, 20)
        assert lsm.count(k1, k2).tolist() == oracle.count_many(k1, k2).tolist()


# -- bulk_build ---------------------------------------------------------------

def test_bulk_build_single_batch_equals_update():
    keys, vals = [9, 3, 3, 1], [1, 2, 3, 4]
    a = bulk_build(Batch.inserts(keys, vals), 4)
    b = Lsm(4)
    b.insert_batch(keys, vals)
    assert a.levels[0].equals(b.levels[0])


def test_bulk_build_three_batches(rng):
    b = 8
    keys = rng.permutation(1000)[:3 * b]
    lsm = bulk_build(Batch.inserts(keys, keys * 2), b)
    assert lsm.full_level_indices() == [0, 1]
    lsm.check_invariants()
    oracle = Oracle()
    oracle.apply_batch(Batch.inserts(keys, keys * 2))
    probe = np.arange(1001)
    assert lsm.lookup(probe).as_list() == oracle.lookup_many(probe)


def test_bulk_build_duplicates_match_sequential(rng):
    b = 16
    keys = rng.integers(0, 30, 11 * b)
    vals = rng.integers(0, 10**6, 11 * b)
    built = bulk_build(Batch.inserts(keys, vals), b)
    seq = Lsm(b)
    oracle = Oracle()
    for j in range(11):
        batch = Batch.inserts(keys[j * b:(j + 1) * b], vals[j * b:(j + 1) * b])
        seq.update_batch(batch)
        oracle.apply_batch(batch)
    probe = np.arange(-1, 32)
    assert built.lookup(probe).as_list() == seq.lookup(probe).as_list() == oracle.lookup_many(probe)
    k1, k2 = random_windows(rng, 0, 30, 50)
    assert built.range(k1, k2).keys.tolist() == seq.range(k1, k2).keys.tolist()
    assert built.range(k1, k2).values.tolist() == seq.range(k1, k2).values.tolist()
    assert built.r == seq.r == 11


def test_bulk_build_errors_and_empty():
    assert bulk_build([], 4).r == 0
    with pytest.raises(SizeNotMultipleOfBatch):
        bulk_build(Batch.inserts([1, 2, 3], [0, 0, 0]), 4)
    with pytest.raises(KeyOutOfDomain):
        bulk_build(Batch.inserts([1, 2, 3, 1 << 31], [0] * 4), 4)


# -- lookup -------------------------------------------------------------------

def test_lookup_tombstone_wins():
    lsm = Lsm(2)
    lsm.update_batch([Insert(5, A), Insert(6, B)])
    lsm.update_batch([Delete(5), Delete(5)])
    assert lsm.lookup([5, 6]).as_list() == [None, B]


def test_lookup_most_recent_wins():
    lsm = Lsm(2)
    lsm.update_batch([Insert(5, A), Insert(6, A)])
    lsm.update_batch([Insert(5, B), Insert(7, A)])
    assert lsm.get(5) == B


def test_lookup_first_occurrence_in_batch_wins():
    lsm = Lsm(4)
    lsm.update_batch([Insert(5, A), Insert(5, B), Insert(5, C), Insert(1, D)])
    assert lsm.get(5) == A


def test_lookup_random_against_oracle(rng):
    b = 64
    lsm, oracle = Lsm(b), Oracle()
    for batch in random_schedule(rng, b, 64, 2000, 0.3):
        lsm.update_batch(batch)
        oracle.apply_batch(batch)
    lo = int(lsm.full_levels()[-1].original_keys.min())
    probe = lo - 5 + rng.integers(0, 2010, 10_000)
    assert lsm.lookup(probe).as_list() == oracle.lookup_many(probe)


def test_lookup_probe_bound(rng):
    b = 16
    lsm = Lsm(b)
    for r in range(1, 300):
        lsm.insert_batch(rng.integers(0, 1 << 20, b), np.zeros(b))
        res = lsm.lookup(rng.integers(0, 1 << 20, 50))
        bound = sum(int(np.ceil(np.log2(b << i))) + 1 for i in lsm.full_level_indices())
        assert res.probes.max() <= bound


# -- count / range ------------------------------------------------------------

def test_count_example():
    assert example_state().count([0], [15]).tolist() == [3]


def test_range_example():
    res = example_state().range([0], [15])
    assert res.offsets.tolist() == [0]
    assert res.pairs(0) == [(3, E), (7, B), (12, D)]


def test_example_against_oracle():
    oracle = Oracle()
    oracle.apply_batch([Insert(3, A), Insert(7, B), Insert(9, C), Insert(12, D)])
    oracle.apply_batch([Insert(3, E), Delete(9), Insert(20, F), Insert(21, G)])
    assert oracle.count(0, 15) == 3
    assert oracle.range(0, 15) == [(3, E), (7, B), (12, D)]


def test_queries_on_empty_lsm():
    lsm = Lsm(4)
    assert lsm.count([0], [100]).tolist() == [0]
    res = lsm.range([0], [100])
    assert res.offsets.tolist() == [0] and res.keys.size == 0
    assert lsm.lookup([1]).as_list() == [None]


def test_point_count_after_insert_and_delete():
    lsm = Lsm(2)
    lsm.update_batch([Insert(42, A), Insert(1, A)])
    assert lsm.count([42], [42]).tolist() == [1]
    lsm.update_batch([Delete(42), Delete(42)])
    assert lsm.count([42], [42]).tolist() == [0]


def test_invalid_range():
    lsm = example_state()
    with pytest.raises(InvalidRange):
        lsm.count([5], [4])
    with pytest.raises(InvalidRange):
        lsm.range([0, 9], [3, 8])


def test_range_offsets_multiple_queries():
    res = example_state().range([0, 8, 20, 100], [15, 9, 21, 200])
    assert res.offsets.tolist() == [0, 3, 3, 5]
    assert [res.pairs(i) for i in range(4)] == [[(3, E), (7, B), (12, D)], [], [(20, F), (21, G)], []]


def test_range_random_against_oracle(rng):
    b = 32
    lsm, oracle = Lsm(b), Oracle()
    for batch in random_schedule(rng, b, 40, 500, 0.4):
        lsm.update_batch(batch)
        oracle.apply_batch(batch)
    lo = int(lsm.full_levels()[-1].original_keys.min())
    k1, k2 = random_windows(rng, lo, 500, 100)
    res = lsm.range(k1, k2)
    for i in range(100):
        assert res.pairs(i) == oracle.range(int(k1[i]), int(k2[i]))
    assert np.array_equal(lsm.count(k1, k2), res.counts)


def test_queries_do_not_mutate_state():
    lsm = example_state()
    before = [lvl.keys.copy() for lvl in lsm.full_levels()], lsm.stats()
    lsm.lookup([3, 9]), lsm.count([0], [30]), lsm.range([0], [30])
    assert all(np.array_equal(a, l.keys) for a, l in zip(before[0], lsm.full_levels()))
    assert lsm.stats() == before[1]
