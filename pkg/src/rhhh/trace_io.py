"""Packet traces: CSV and 8-byte binary records, plus synthetic Zipf streams."""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Union

import numpy as np

__all__ = [
    "PacketRecord",
    "TraceFormatError",
    "SyntheticSpec",
    "read_csv",
    "read_binary",
    "write_csv",
    "write_binary",
    "read_trace",
    "load_keys",
    "iter_key_chunks",
    "records_to_keys",
    "generate_zipf",
    "zipf_keys",
    "zipf_probabilities",
]

PathLike = Union[str, Path]

_RECORD = struct.Struct(">II")
_CHUNK_RECORDS = 1 << 16


class PacketRecord(NamedTuple):
    src: int
    dst: int = 0

    def __str__(self) -> str:
        return f"{ipaddress.IPv4Address(self.src)},{ipaddress.IPv4Address(self.dst)}"

    @property
    def key(self) -> int:
        return (self.src << 32) | self.dst


class TraceFormatError(ValueError):
    pass


def _parse_ip(text: str, path, lineno: int) -> int:
    try:
        return int(ipaddress.IPv4Address(text.strip()))
    except ValueError as exc:
        raise TraceFormatError(f"{path}:{lineno}: {exc}") from None


def read_csv(path: PathLike) -> Iterator[PacketRecord]:
    """Yield records from ``src_ip,dst_ip`` lines; ``dst_ip`` may be omitted.

    Blank lines are skipped.
    """
    with open(path, encoding="ascii", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) > 2:
                raise TraceFormatError(f"{path}:{lineno}: expected 'src,dst', got {line!r}")
            src = _parse_ip(fields[0], path, lineno)
            dst = _parse_ip(fields[1], path, lineno) if len(fields) == 2 else 0
            yield PacketRecord(src, dst)


def read_binary(path: PathLike) -> Iterator[PacketRecord]:
    """Yield records from big-endian ``(src, dst)`` pairs of 32-bit words."""
    with open(path, "rb") as fh:
        offset = 0
        while True:
            chunk = fh.read(_RECORD.size * _CHUNK_RECORDS)
            if not chunk:
                return
            whole = len(chunk) - len(chunk) % _RECORD.size
            for src, dst in _RECORD.iter_unpack(chunk[:whole]):
                yield PacketRecord(src, dst)
            offset += whole
            if whole != len(chunk):
                raise TraceFormatError(
                    f"{path}: truncated record at byte {offset} "
                    f"({len(chunk) - whole} of {_RECORD.size} bytes)"
                )


def write_csv(path: PathLike, records: Iterable[PacketRecord], one_dim: bool = False) -> int:
    n = 0
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            src = ipaddress.IPv4Address(rec[0])
            fh.write(f"{src}\n" if one_dim else f"{src},{ipaddress.IPv4Address(rec[1])}\n")
            n += 1
    return n


def write_binary(path: PathLike, records: Iterable[PacketRecord]) -> int:
    n = 0
    with open(path, "wb") as fh:
        for rec in records:
            fh.write(_RECORD.pack(rec[0], rec[1]))
            n += 1
    return n


def read_trace(path: PathLike, fmt: str) -> Iterator[PacketRecord]:
    if fmt == "csv":
        return read_csv(path)
    if fmt == "bin":
        return read_binary(path)
    raise ValueError(f"unknown trace format {fmt!r}")


def records_to_keys(records: Iterable[PacketRecord], one_dim: bool = False) -> np.ndarray:
    """Pack records into uint64 keys; ``one_dim`` drops the destination."""
    if one_dim:
        keys = [r[0] << 32 for r in records]
    else:
        keys = [(r[0] << 32) | r[1] for r in records]
    return np.array(keys, dtype=np.uint64)


def load_keys(path: PathLike, fmt: str, one_dim: bool = False) -> np.ndarray:
    """Materialize a whole trace as packed keys (for timing without I/O)."""
    if fmt == "bin":
        raw = Path(path).read_bytes()
        if len(raw) % _RECORD.size:
            raise TraceFormatError(f"{path}: truncated record at byte {len(raw) - len(raw) % 8}")
        pairs = np.frombuffer(raw, dtype=">u4").reshape(-1, 2).astype(np.uint64)
        if one_dim:
            return pairs[:, 0] << np.uint64(32)
        return (pairs[:, 0] << np.uint64(32)) | pairs[:, 1]
    return records_to_keys(read_trace(path, fmt), one_dim)


def iter_key_chunks(
    path: PathLike, fmt: str, one_dim: bool = False, chunk: int = 1 << 20
) -> Iterator[np.ndarray]:
    """Stream a trace as arrays of at most ``chunk`` packed keys."""
    buf = []
    for rec in read_trace(path, fmt):
        buf.append(rec)
        if len(buf) == chunk:
            yield records_to_keys(buf, one_dim)
            buf = []
    if buf:
        yield records_to_keys(buf, one_dim)


@dataclass(frozen=True)
class SyntheticSpec:
    flows: int
    zipf_s: float
    packets: int
    seed: int = 0

    def __post_init__(self):
        if self.flows < 1:
            raise ValueError("flows must be at least 1")
        if self.packets < 0:
            raise ValueError("packets must be non-negative")
        if self.zipf_s < 0:
            raise ValueError("zipf_s must be non-negative")


def zipf_probabilities(flows: int, s: float) -> np.ndarray:
    """P(flow i) proportional to ``i ** -s`` for ranks ``i = 1..flows``."""
    w = np.arange(1, flows + 1, dtype=np.float64) ** -s
    return w / w.sum()


def _flow_addresses(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    # Flows share random prefixes so aggregates exist at every level: a few
    # first bytes, more second bytes under each, and so on down the tree.
    rng = np.random.Generator(np.random.PCG64([spec.seed, 0x5EED]))
    out = []
    for _ in range(2):
        fanout = (8, 32, 128)
        b0 = rng.integers(1, 224, size=fanout[0])
        b1 = rng.integers(0, 256, size=(fanout[0], fanout[1]))
        b2 = rng.integers(0, 256, size=(fanout[0], fanout[1], fanout[2]))
        i0 = rng.integers(0, fanout[0], size=spec.flows)
        i1 = rng.integers(0, fanout[1], size=spec.flows)
        i2 = rng.integers(0, fanout[2], size=spec.flows)
        b3 = rng.integers(0, 256, size=spec.flows)
        addr = (
            (b0[i0].astype(np.uint64) << np.uint64(24))
            | (b1[i0, i1].astype(np.uint64) << np.uint64(16))
            | (b2[i0, i1, i2].astype(np.uint64) << np.uint64(8))
            | b3.astype(np.uint64)
        )
        out.append(addr)
    return out[0], out[1]


def zipf_flow_ids(spec: SyntheticSpec) -> np.ndarray:
    """Zero-based flow ranks drawn i.i.d. from the Zipf law."""
    rng = np.random.Generator(np.random.PCG64([spec.seed, 0xF10]))
    probs = zipf_probabilities(spec.flows, spec.zipf_s)
    return rng.choice(spec.flows, size=spec.packets, p=probs)


def zipf_keys(spec: SyntheticSpec, one_dim: bool = False) -> np.ndarray:
    src, dst = _flow_addresses(spec)
    ids = zipf_flow_ids(spec)
    keys = src[ids] << np.uint64(32)
    if not one_dim:
        keys |= dst[ids]
    return keys


def generate_zipf(spec: SyntheticSpec) -> Iterator[PacketRecord]:
    for k in zipf_keys(spec).tolist():
        yield PacketRecord(k >> 32, k & 0xFFFFFFFF)
