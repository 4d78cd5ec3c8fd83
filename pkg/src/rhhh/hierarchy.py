"""Prefix lattices over IPv4 source (and optionally destination) addresses.

A packet key is packed into one 64-bit integer, ``src << 32 | dst``.  Every
lattice node owns a 64-bit mask; generalizing a key to a node is a single
bitwise AND.  One-dimensional hierarchies simply use a zero destination mask.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, NamedTuple, Optional, Union

import numpy as np

__all__ = [
    "PacketKey",
    "PrefixPattern",
    "Prefix",
    "Hierarchy",
    "PrefixIndex",
    "NO_COMMON_DESCENDANT",
    "NoCommonDescendant",
    "pack",
    "unpack",
    "generalize",
    "generalizes",
    "strictly_generalizes",
    "best_generalized",
    "glb",
    "nodes_by_level",
    "HIERARCHY_NAMES",
]

_U32 = 0xFFFFFFFF


class PacketKey(NamedTuple):
    """A fully specified item: source and destination IPv4 addresses as ints."""

    src: int
    dst: int = 0

    def packed(self) -> int:
        return pack(self.src, self.dst)


def pack(src: int, dst: int = 0) -> int:
    if not (0 <= src <= _U32 and 0 <= dst <= _U32):
        raise ValueError(f"address out of 32-bit range: src={src}, dst={dst}")
    return (src << 32) | dst


def unpack(key: int) -> PacketKey:
    return PacketKey(key >> 32, key & _U32)


def _as_packed(key: Union[int, PacketKey, tuple]) -> int:
    if isinstance(key, tuple):
        return pack(*key)
    return int(key)


@dataclass(frozen=True)
class PrefixPattern:
    """One lattice node: how many units of src/dst are specified.

    Lengths are in hierarchy units (bytes or bits).  ``index`` is the node's
    position in :attr:`Hierarchy.nodes`, which is also the index of its
    counter table in a sketch.
    """

    index: int
    src_len: int
    dst_len: int
    level: int
    mask: int
    unit_bits: int
    width: int
    dims: int

    def finer_or_equal(self, other: "PrefixPattern") -> bool:
        """True if this pattern specifies at least as much as ``other`` in every dimension."""
        return self.src_len >= other.src_len and self.dst_len >= other.dst_len


@dataclass(frozen=True)
class Prefix:
    pattern: PrefixPattern
    key: int

    @property
    def src(self) -> int:
        return self.key >> 32

    @property
    def dst(self) -> int:
        return self.key & _U32

    @property
    def level(self) -> int:
        return self.pattern.level

    def __str__(self) -> str:
        pat = self.pattern
        src = _format_dim(self.src, pat.src_len, pat.unit_bits, pat.width)
        if pat.dims == 1:
            return src
        dst = _format_dim(self.dst, pat.dst_len, pat.unit_bits, pat.width)
        return f"({src}, {dst})"

    def __repr__(self) -> str:
        return f"Prefix({self})"


class NoCommonDescendant:
    """Sentinel glb of two prefixes whose specified parts conflict.

    Every estimator treats it as an item with frequency 0.
    """

    _instance: Optional["NoCommonDescendant"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_COMMON_DESCENDANT"


NO_COMMON_DESCENDANT = NoCommonDescendant()


def _dotted(value: int, width: int) -> list[str]:
    return [str((value >> (width - 8 * (i + 1))) & 0xFF) for i in range(width // 8)]


def _format_dim(value: int, length: int, unit_bits: int, width: int) -> str:
    units = width // unit_bits
    if length == 0:
        return "*"
    if length == units:
        return ".".join(_dotted(value, width))
    if unit_bits == 8:
        return ".".join(_dotted(value, width)[:length]) + ".*"
    return ".".join(_dotted(value, width)) + f"/{length}"


def _dim_mask(length: int, unit_bits: int, width: int) -> int:
    bits = length * unit_bits
    return ((1 << bits) - 1) << (width - bits)


HIERARCHY_NAMES = ("1d-byte", "1d-bit", "2d-byte")


class Hierarchy:
    """A lattice of prefix patterns.

    ``unit_bits`` is the generalization granularity (8 for bytes, 1 for bits)
    and ``units`` the number of units per address, so addresses are
    ``unit_bits * units`` bits wide.  IPv4 hierarchies use 32-bit addresses;
    narrower widths exist for exhaustive toy lattices in tests.

    Nodes are indexed level by level, most specific first, so node 0 is the
    fully specified pattern and node ``H - 1`` the fully general one.
    """

    def __init__(self, name: str, unit_bits: int, units: int, dims: int):
        if unit_bits not in (1, 8) or dims not in (1, 2):
            raise ValueError("unsupported hierarchy shape")
        width = unit_bits * units
        if width > 32:
            raise ValueError("addresses are at most 32 bits wide")
        self.name = name
        self.unit_bits = unit_bits
        self.units = units
        self.dims = dims
        self.width = width

        shapes = []
        dst_range = range(units + 1) if dims == 2 else (0,)
        for s in range(units + 1):
            for d in dst_range:
                level = (units - s) + ((units - d) if dims == 2 else 0)
                shapes.append((level, -s, s, d))
        shapes.sort()
        nodes = []
        for index, (level, _, s, d) in enumerate(shapes):
            mask = (_dim_mask(s, unit_bits, width) << 32) | (
                _dim_mask(d, unit_bits, width) if dims == 2 else 0
            )
            nodes.append(PrefixPattern(index, s, d, level, mask, unit_bits, width, dims))
        self.nodes: tuple[PrefixPattern, ...] = tuple(nodes)
        self._by_lens = {(n.src_len, n.dst_len): n for n in nodes}
        self.level_of = {n: n.level for n in nodes}

    @classmethod
    def by_name(cls, name: str) -> "Hierarchy":
        shapes = {"1d-byte": (8, 4, 1), "1d-bit": (1, 32, 1), "2d-byte": (8, 4, 2)}
        try:
            return cls(name, *shapes[name])
        except KeyError:
            raise ValueError(
                f"unknown hierarchy {name!r}; expected one of {', '.join(HIERARCHY_NAMES)}"
            ) from None

    @classmethod
    def toy(cls, units: int = 2, dims: int = 1) -> "Hierarchy":
        """Byte lattice over ``units``-byte addresses, small enough to enumerate."""
        return cls(f"toy-{dims}d-{units}", 8, units, dims)

    @property
    def H(self) -> int:
        return len(self.nodes)

    @property
    def L(self) -> int:
        return self.units * self.dims

    @cached_property
    def masks(self) -> np.ndarray:
        return np.array([n.mask for n in self.nodes], dtype=np.uint64)

    @property
    def fully_specified(self) -> PrefixPattern:
        return self.nodes[0]

    @property
    def fully_general(self) -> PrefixPattern:
        return self.nodes[-1]

    def node(self, src_len: int, dst_len: int = 0) -> PrefixPattern:
        return self._by_lens[(src_len, dst_len)]

    def levels(self) -> list[tuple[int, list[PrefixPattern]]]:
        grouped: dict[int, list[PrefixPattern]] = defaultdict(list)
        for n in self.nodes:
            grouped[n.level].append(n)
        return [(lvl, grouped[lvl]) for lvl in range(self.L + 1)]

    @cached_property
    def strict_ancestors(self) -> tuple[tuple[PrefixPattern, ...], ...]:
        """For every node index, the strictly coarser patterns."""
        return tuple(
            tuple(m for m in self.nodes if n.finer_or_equal(m) and m != n) for n in self.nodes
        )

    @cached_property
    def strict_descendants(self) -> tuple[tuple[PrefixPattern, ...], ...]:
        return tuple(
            tuple(m for m in self.nodes if m.finer_or_equal(n) and m != n) for n in self.nodes
        )

    def generalize(self, key, node: PrefixPattern) -> Prefix:
        return generalize(key, node)

    def key(self, src: str, dst: str = "0.0.0.0") -> int:
        """Pack dotted addresses (``width`` bits each) into a key."""
        return pack(self._parse_addr(src), self._parse_addr(dst) if self.dims == 2 else 0)

    def prefix(self, text: Union[str, tuple[str, str]]) -> Prefix:
        """Parse ``"181.7.*"``, ``"10.0.0.0/9"`` or ``("1.2.*", "5.*")``."""
        if self.dims == 2:
            if isinstance(text, str):
                text = tuple(t.strip() for t in text.strip("() ").split(","))
            src_text, dst_text = text
            s_val, s_len = self._parse_dim(src_text)
            d_val, d_len = self._parse_dim(dst_text)
        else:
            if not isinstance(text, str):
                raise ValueError("one-dimensional prefixes are plain strings")
            s_val, s_len = self._parse_dim(text)
            d_val, d_len = 0, 0
        node = self.node(s_len, d_len)
        return generalize(pack(s_val, d_val), node)

    def _parse_addr(self, text: str) -> int:
        parts = text.split(".")
        if len(parts) != self.width // 8:
            raise ValueError(f"expected {self.width // 8} dotted bytes: {text!r}")
        value = 0
        for part in parts:
            b = int(part)
            if not 0 <= b <= 255:
                raise ValueError(f"byte out of range in {text!r}")
            value = (value << 8) | b
        return value

    def _parse_dim(self, text: str) -> tuple[int, int]:
        text = text.strip()
        nbytes = self.width // 8
        if text == "*":
            return 0, 0
        if "/" in text:
            addr, length = text.split("/")
            bits = int(length)
            if bits % self.unit_bits:
                raise ValueError(f"{text!r} is not aligned to this hierarchy's units")
            return self._parse_addr(addr), bits // self.unit_bits
        if text.endswith(".*"):
            head = text[:-2].split(".")
            if self.unit_bits != 8 or len(head) >= nbytes:
                raise ValueError(f"bad prefix {text!r}")
            head += ["0"] * (nbytes - len(head))
            return self._parse_addr(".".join(head)), len(text[:-2].split(".")) * 8 // self.unit_bits
        return self._parse_addr(text), self.units

    def __repr__(self) -> str:
        return f"Hierarchy({self.name!r}, H={self.H}, L={self.L})"


def generalize(key, node: PrefixPattern) -> Prefix:
    return Prefix(node, _as_packed(key) & node.mask)


def generalizes(p: Prefix, q: Prefix) -> bool:
    """True iff ``p`` is an ancestor of (or equal to) ``q``."""
    return q.pattern.finer_or_equal(p.pattern) and (q.key & p.pattern.mask) == p.key


def strictly_generalizes(p: Prefix, q: Prefix) -> bool:
    return p != q and generalizes(p, q)


def best_generalized(p: Prefix, P: Union[Iterable[Prefix], "PrefixIndex"]) -> list[Prefix]:
    """Members of ``P`` strictly below ``p`` with no other member in between."""
    if isinstance(P, PrefixIndex):
        return P.best_generalized(p)
    below = [h for h in P if strictly_generalizes(p, h)]
    return [h for h in below if not any(strictly_generalizes(h2, h) for h2 in below)]


def glb(h: Prefix, h2: Prefix):
    """Most general common descendant of ``h`` and ``h2``.

    Returns :data:`NO_COMMON_DESCENDANT` when their specified parts conflict.
    """
    common = h.pattern.mask & h2.pattern.mask
    if (h.key & common) != (h2.key & common):
        return NO_COMMON_DESCENDANT
    a, b = h.pattern, h2.pattern
    node = _lattice(a.unit_bits, a.width // a.unit_bits, a.dims).node(
        max(a.src_len, b.src_len), max(a.dst_len, b.dst_len)
    )
    return Prefix(node, h.key | h2.key)


@lru_cache(maxsize=None)
def _lattice(unit_bits: int, units: int, dims: int) -> Hierarchy:
    return Hierarchy(f"lattice-{unit_bits}x{units}x{dims}", unit_bits, units, dims)


def nodes_by_level(hierarchy: Hierarchy) -> list[tuple[int, list[PrefixPattern]]]:
    return hierarchy.levels()


class PrefixIndex:
    """A growing prefix set with fast descendant queries.

    Members are bucketed per node; for every strictly coarser node the member
    is also indexed by its generalized key, so ``descendants(p)`` touches only
    the members under ``p``.
    """

    def __init__(self, hierarchy: Hierarchy, members: Iterable[Prefix] = ()):
        self.hierarchy = hierarchy
        self._members: dict[Prefix, None] = {}
        self._by_node: list[set[int]] = [set() for _ in hierarchy.nodes]
        # (ancestor node index, ancestor key) -> members strictly below it
        self._under: dict[tuple[int, int], list[Prefix]] = defaultdict(list)
        for m in members:
            self.add(m)

    def add(self, p: Prefix) -> None:
        if p in self._members:
            return
        self._members[p] = None
        self._by_node[p.pattern.index].add(p.key)
        for anc in self.hierarchy.strict_ancestors[p.pattern.index]:
            self._under[(anc.index, p.key & anc.mask)].append(p)

    def __contains__(self, p: Prefix) -> bool:
        return p in self._members

    def __iter__(self) -> Iterator[Prefix]:
        return iter(self._members)

    def __len__(self) -> int:
        return len(self._members)

    def descendants(self, p: Prefix) -> list[Prefix]:
        return self._under.get((p.pattern.index, p.key), [])

    def has_between(self, p: Prefix, h: Prefix) -> bool:
        """Is some member strictly between ancestor ``p`` and descendant ``h``?"""
        for anc in self.hierarchy.strict_ancestors[h.pattern.index]:
            if anc == p.pattern or not anc.finer_or_equal(p.pattern):
                continue
            k = h.key & anc.mask
            if k in self._by_node[anc.index] and (k & p.pattern.mask) == p.key:
                return True
        return False

    def best_generalized(self, p: Prefix) -> list[Prefix]:
        return [h for h in self.descendants(p) if not self.has_between(p, h)]
