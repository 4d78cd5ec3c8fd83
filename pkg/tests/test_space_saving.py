from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rhhh.space_saving import CounterBank, SpaceSaving


class ReferenceSpaceSaving:
    """Plain dictionary model; evicts the minimum count that changed longest ago."""

    def __init__(self, k):
        self.k = k
        self.entries = {}  # key -> [count, over, stamp]
        self.clock = 0

    def increment(self, key):
        self.clock += 1
        if key in self.entries:
            e = self.entries[key]
            e[0] += 1
            e[2] = self.clock
        elif len(self.entries) < self.k:
            self.entries[key] = [1, 0, self.clock]
        else:
            victim = min(self.entries, key=lambda x: (self.entries[x][0], self.entries[x][2]))
            c = self.entries.pop(victim)[0]
            self.entries[key] = [c + 1, c, self.clock]

    def snapshot(self):
        return {k: (c, c - o) for k, (c, o, _) in self.entries.items()}


def snapshot(ss):
    return {e.key: (e.upper, e.lower) for e in ss.heavy_entries()}


def test_worked_example():
    ss = SpaceSaving(2)
    a, b, c = 10, 11, 12
    for key in (a, a, b, c):
        ss.increment(key)
    assert snapshot(ss) == {a: (2, 2), c: (2, 1)}
    assert ss.query(c) == (2, 1)
    # b was evicted; a full table bounds absent keys by the minimum
    assert ss.query(b) == (2, 0)
    assert ss.min_count() == 2


def test_empty_and_partial_tables():
    ss = SpaceSaving(3)
    assert ss.query(1) == (0, 0)
    assert ss.min_count() == 0
    ss.increment(1)
    assert ss.query(2) == (0, 0)
    assert len(ss) == 1 and ss.total_updates == 1


def test_rejects_zero_capacity():
    with pytest.raises(ValueError):
        SpaceSaving(0)


streams = st.lists(st.integers(0, 12), max_size=80)


@given(streams, st.integers(1, 6))
def test_matches_reference_model(stream, k):
    ss, ref = SpaceSaving(k), ReferenceSpaceSaving(k)
    for key in stream:
        ss.increment(key)
        ref.increment(key)
        assert snapshot(ss) == ref.snapshot()


@given(streams, st.integers(1, 8))
def test_bounds_and_conservation(stream, k):
    ss = SpaceSaving(k)
    truth = Counter()
    for key in stream:
        ss.increment(key)
        truth[key] += 1
        entries = ss.heavy_entries()
        assert sum(e.upper for e in entries) == ss.total_updates
        for e in entries:
            assert e.lower <= truth[e.key] <= e.upper
            assert e.upper - e.lower <= ss.total_updates / k
    for key in range(13):
        upper, lower = ss.query(key)
        assert lower <= truth[key] <= upper


@given(st.lists(st.integers(0, 5), max_size=60))
def test_exact_when_capacity_suffices(stream):
    ss = SpaceSaving(6)
    ss.increment_many(np.array(stream, dtype=np.uint64))
    assert snapshot(ss) == {k: (c, c) for k, c in Counter(stream).items()}


def test_large_keys_and_bulk_path():
    rng = np.random.default_rng(0)
    keys = rng.integers(0, 2**63, size=50, dtype=np.uint64) * np.uint64(2)
    stream = rng.choice(keys, size=5000)
    bulk, single = SpaceSaving(16), SpaceSaving(16)
    bulk.increment_many(stream)
    for k in stream.tolist():
        single.increment(k)
    assert snapshot(bulk) == snapshot(single)


def test_bank_tables_are_independent():
    bank = CounterBank(3, 4)
    bank.increment(0, 7)
    bank.increment(2, 7)
    bank.increment(2, 7)
    assert [bank.query(t, 7) for t in range(3)] == [(1, 1), (0, 0), (2, 2)]
    assert [bank.total_updates(t) for t in range(3)] == [1, 0, 2]
    assert bank.size(1) == 0
