from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rhhh.trace_io import (
    PacketRecord,
    SyntheticSpec,
    TraceFormatError,
    generate_zipf,
    iter_key_chunks,
    load_keys,
    read_binary,
    read_csv,
    write_binary,
    write_csv,
    zipf_flow_ids,
    zipf_keys,
)


def test_csv_examples(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("1.2.3.4,5.6.7.8\n\n1.2.3.4\n")
    assert list(read_csv(f)) == [PacketRecord(0x01020304, 0x05060708), PacketRecord(0x01020304, 0)]


def test_csv_reports_line(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1.2.3.4,5.6.7.8\n999.1.1.1,1.1.1.1\n")
    with pytest.raises(TraceFormatError, match=":2:"):
        list(read_csv(f))
    f.write_text("1.2.3.4,5.6.7.8,9.9.9.9\n")
    with pytest.raises(TraceFormatError, match=":1:"):
        list(read_csv(f))


def test_missing_file():
    with pytest.raises(OSError):
        list(read_csv("/nonexistent/trace.csv"))


def test_binary_examples(tmp_path):
    f = tmp_path / "t.bin"
    f.write_bytes(bytes(range(1, 9)))
    assert list(read_binary(f)) == [PacketRecord(0x01020304, 0x05060708)]
    f.write_bytes(b"")
    assert list(read_binary(f)) == []
    f.write_bytes(bytes(range(1, 10)))
    with pytest.raises(TraceFormatError, match="truncated"):
        list(read_binary(f))
    with pytest.raises(TraceFormatError):
        load_keys(f, "bin")


records = st.lists(st.builds(PacketRecord, st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1)), max_size=50)


@given(records)
def test_round_trips(tmp_path_factory, recs):
    d = tmp_path_factory.mktemp("rt")
    write_csv(d / "a.csv", recs)
    write_binary(d / "a.bin", recs)
    assert list(read_csv(d / "a.csv")) == recs
    assert list(read_binary(d / "a.bin")) == recs
    packed = [r.key for r in recs]
    assert load_keys(d / "a.bin", "bin").tolist() == packed
    assert load_keys(d / "a.csv", "csv").tolist() == packed
    chunks = list(iter_key_chunks(d / "a.bin", "bin", chunk=7))
    assert sum((c.tolist() for c in chunks), []) == packed
    assert load_keys(d / "a.bin", "bin", one_dim=True).tolist() == [r.src << 32 for r in recs]


def test_one_dim_csv(tmp_path):
    recs = [PacketRecord(5, 9), PacketRecord(7, 1)]
    write_csv(tmp_path / "a.csv", recs, one_dim=True)
    assert list(read_csv(tmp_path / "a.csv")) == [PacketRecord(5, 0), PacketRecord(7, 0)]


def test_zipf_uniform_when_s_zero():
    ids = zipf_flow_ids(SyntheticSpec(10, 0.0, 100_000, seed=1))
    counts = np.bincount(ids, minlength=10)
    chi2 = ((counts - 10_000) ** 2 / 10_000).sum()
    assert chi2 < 27.88  # 9 dof, p = 0.001


def test_zipf_single_flow_is_constant():
    keys = zipf_keys(SyntheticSpec(1, 1.0, 1000, seed=3))
    assert len(set(keys.tolist())) == 1


def test_zipf_top_flow_share():
    n = 10**6
    ids = zipf_flow_ids(SyntheticSpec(1000, 1.0, n, seed=5))
    harmonic = math.fsum(1 / i for i in range(1, 1001))
    assert harmonic == pytest.approx(7.485, abs=1e-3)
    p = 1 / harmonic
    assert abs((ids == 0).sum() - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_zipf_deterministic():
    spec = SyntheticSpec(100, 1.2, 5000, seed=9)
    assert np.array_equal(zipf_keys(spec), zipf_keys(spec))
    assert list(generate_zipf(spec))[:5] == list(generate_zipf(spec))[:5]
    assert not np.array_equal(zipf_keys(spec), zipf_keys(SyntheticSpec(100, 1.2, 5000, seed=10)))
    assert np.all(zipf_keys(spec, one_dim=True) & np.uint64(0xFFFFFFFF) == 0)


@pytest.mark.parametrize("kwargs", [dict(flows=0), dict(packets=-1), dict(zipf_s=-1)])
def test_spec_validation(kwargs):
    args = dict(flows=10, zipf_s=1.0, packets=10)
    args.update(kwargs)
    with pytest.raises(ValueError):
        SyntheticSpec(**args)
