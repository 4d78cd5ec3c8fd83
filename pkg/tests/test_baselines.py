from __future__ import annotations


import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rhhh.baselines import (
    ExactFrequencyTable,
    exact_conditioned_2d_identity_check,
    exact_conditioned_frequency,
    exact_frequency,
    exact_hhh,
    inclusion_exclusion_formula,
    lemma_2d_applies,
    mst_sketch,
    mst_update,
    mst_update_many,
)
from rhhh.hierarchy import Hierarchy, best_generalized, generalize, strictly_generalizes
from rhhh.metrics import evaluate
from rhhh.sketch import RhhhSketch

BYTE1 = Hierarchy.by_name("1d-byte")
TOY1 = Hierarchy.toy(units=2, dims=1)
TOY2 = Hierarchy.toy(units=2, dims=2)


def toy_table():
    return ExactFrequencyTable.from_counts({TOY1.key("1.1"): 5, TOY1.key("1.2"): 3, TOY1.key("2.1"): 4})


def test_mst_updates_every_table():
    sk = mst_sketch(BYTE1, 0.01)
    assert sk.capacity == 100 and sk.deterministic
    mst_update(sk, BYTE1.key("1.2.3.4"))
    assert [sk.tables.total_updates(t) for t in range(5)] == [1] * 5
    mst_update_many(sk, np.full(99, BYTE1.key("1.2.3.4"), dtype=np.uint64))
    assert [sk.tables.total_updates(t) for t in range(5)] == [100] * 5
    with pytest.raises(ValueError):
        mst_update(RhhhSketch(BYTE1, 4), 1)


def test_exact_frequency_examples():
    t = toy_table()
    assert t.N == 12
    assert exact_frequency(t, TOY1.prefix("*")) == 12
    assert exact_frequency(t, TOY1.prefix("1.*")) == 8
    assert exact_frequency(t, TOY1.prefix("3.*")) == 0


def test_table_constructors_agree():
    keys = np.array([TOY1.key(a) for a in ["1.1"] * 5 + ["1.2"] * 3 + ["2.1"] * 4], dtype=np.uint64)
    a, b = ExactFrequencyTable.from_keys(keys), toy_table()
    assert np.array_equal(a.keys, b.keys) and np.array_equal(a.counts, b.counts)
    assert ExactFrequencyTable.from_counts({(1, 2): 3}).keys.tolist() == [(1 << 32) | 2]


def test_conditioned_frequency_examples():
    t = toy_table()
    p = TOY1.prefix("1.*")
    assert exact_conditioned_frequency(t, p, []) == exact_frequency(t, p)
    keys = [f"101.102.{i}.1" for i in range(102)] + [f"101.{7 + i}.0.1" for i in range(6)]
    t = ExactFrequencyTable.from_keys(np.array([BYTE1.key(k) for k in keys], dtype=np.uint64))
    assert exact_frequency(t, BYTE1.prefix("101.*")) == 108
    assert exact_conditioned_frequency(t, BYTE1.prefix("101.*"), [BYTE1.prefix("101.102.*")]) == 6


def test_exact_hhh_examples():
    res = exact_hhh(toy_table(), TOY1, 1 / 3)
    assert res.hhh == {TOY1.prefix("1.1"), TOY1.prefix("2.1")}
    assert len(res.levels) == TOY1.L + 1
    assert exact_hhh(toy_table(), TOY1, 1.5).hhh == frozenset()
    single = ExactFrequencyTable.from_counts({TOY1.key("9.9"): 7})
    assert exact_hhh(single, TOY1, 0.5).hhh == {TOY1.prefix("9.9")}
    empty = ExactFrequencyTable.from_counts({})
    assert exact_hhh(empty, TOY1, 0.1).hhh == frozenset()


def test_exact_hhh_guard(monkeypatch):
    import rhhh.baselines as b

    monkeypatch.setattr(b, "MAX_ORACLE_KEYS", 2)
    with pytest.raises(ValueError):
        exact_hhh(toy_table(), TOY1, 0.1)


toy_counts = st.dictionaries(
    st.tuples(st.integers(1, 3), st.integers(1, 3)), st.integers(1, 20), min_size=1, max_size=9
)


def toy1_table(counts):
    return ExactFrequencyTable.from_counts({(a << 40) | (b << 32): c for (a, b), c in counts.items()})


def all_prefixes(table, h):
    return {generalize(k, n) for k in table.keys.tolist() for n in h.nodes}


@given(toy_counts, st.floats(0.05, 1.0))
def test_exact_hhh_follows_definition(counts, theta):
    table = toy1_table(counts)
    res = exact_hhh(table, TOY1, theta)
    prev = frozenset()
    for lvl, nodes in TOY1.levels():
        expect = set(prev)
        for p in all_prefixes(table, TOY1):
            if p.pattern in nodes and exact_conditioned_frequency(table, p, prev) >= theta * table.N:
                expect.add(p)
        assert res.levels[lvl] == expect
        assert prev <= res.levels[lvl]
        prev = res.levels[lvl]


@given(toy_counts, st.data())
def test_one_dimensional_identity(counts, data):
    table = toy1_table(counts)
    prefixes = sorted(all_prefixes(table, TOY1) | {TOY1.prefix("3.*")}, key=lambda p: (p.level, p.key))
    q = data.draw(st.sampled_from(prefixes))
    lower = [p for p in prefixes if p.level < q.level]
    P = data.draw(st.lists(st.sampled_from(lower), unique=True)) if lower else []
    G = best_generalized(q, P)
    expect = exact_frequency(table, q) - sum(exact_frequency(table, h) for h in G)
    assert exact_conditioned_frequency(table, q, P) == expect


toy2_values = [0x0101, 0x0102, 0x0201, 0x0202]


def toy2_universe():
    return [(s << 32) | d for s in toy2_values for d in toy2_values]


toy2_prefixes = sorted({generalize(k, n) for k in toy2_universe() for n in TOY2.nodes}, key=lambda p: (p.level, p.key))


@given(st.lists(st.integers(0, 9), min_size=16, max_size=16), st.data())
def test_two_dimensional_identity(weights, data):
    table = ExactFrequencyTable.from_counts(dict(zip(toy2_universe(), weights)))
    q = data.draw(st.sampled_from(toy2_prefixes))
    below = [p for p in toy2_prefixes if strictly_generalizes(q, p)]
    P = data.draw(st.lists(st.sampled_from(below), unique=True, max_size=5)) if below else []
    if lemma_2d_applies(best_generalized(q, P)):
        assert exact_conditioned_2d_identity_check(table, q, P)


def test_two_dimensional_identity_examples():
    table = ExactFrequencyTable.from_counts({k: 1 + i for i, k in enumerate(toy2_universe())})
    top = TOY2.prefix(("*", "*"))
    assert exact_conditioned_2d_identity_check(table, top, [])
    G = [TOY2.prefix(("1.*", "*")), TOY2.prefix(("*", "2.*"))]
    assert lemma_2d_applies(G)
    assert exact_conditioned_2d_identity_check(table, top, G)


def test_identity_needs_disjoint_triples():
    table = ExactFrequencyTable.from_counts({k: 1 for k in toy2_universe()})
    top = TOY2.prefix(("*", "*"))
    G = [TOY2.prefix(("1.1", "*")), TOY2.prefix(("1.*", "2.*")), TOY2.prefix(("*", "2.2"))]
    assert not lemma_2d_applies(G)
    assert exact_conditioned_frequency(table, top, G) != inclusion_exclusion_formula(table, top, G)


def random_stream(rng, hierarchy, packets, distinct):
    src = rng.integers(1, 4, size=(distinct, 4)) * np.array([60, 50, 40, 1]) + rng.integers(0, 3, size=(distinct, 4))
    addrs = (src[:, 0] << 24) | (src[:, 1] << 16) | (src[:, 2] << 8) | src[:, 3]
    keys = addrs.astype(np.uint64) << np.uint64(32)
    if hierarchy.dims == 2:
        keys |= rng.permutation(addrs).astype(np.uint64)
    weights = rng.pareto(1.2, size=distinct) + 0.01
    return rng.choice(keys, size=packets, p=weights / weights.sum())


@pytest.mark.parametrize("name", ["1d-byte", "1d-bit", "2d-byte"])
@pytest.mark.parametrize("seed", range(4))
def test_mst_deterministic_guarantees(name, seed):
    h = Hierarchy.by_name(name)
    rng = np.random.default_rng(seed)
    keys = random_stream(rng, h, int(rng.integers(1_000, 30_000)), int(rng.integers(5, 300)))
    sk = mst_sketch(h, 0.01)
    mst_update_many(sk, keys)
    table = ExactFrequencyTable.from_keys(keys)
    report = evaluate(sk.output(0.05), table, h, 0.05, 0.01)
    assert report.coverage_errors == 0
    assert report.accuracy_error_ratio == 0.0
