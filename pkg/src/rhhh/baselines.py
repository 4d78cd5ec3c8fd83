"""Deterministic references: update-every-level sketching and exact HHH.

The exact side works on an :class:`ExactFrequencyTable`, a sorted array of
distinct fully specified keys with their counts.  Only prefixes with nonzero
frequency are ever enumerated; anything else has conditioned frequency 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .hierarchy import (
    NO_COMMON_DESCENDANT,
    Hierarchy,
    Prefix,
    _as_packed,
    best_generalized,
    generalizes,
    glb,
)
from .calibration import capacity_for
from .sketch import RhhhSketch

__all__ = [
    "MAX_ORACLE_KEYS",
    "mst_sketch",
    "mst_update",
    "mst_update_many",
    "ExactFrequencyTable",
    "ExactHhhResult",
    "exact_frequency",
    "exact_conditioned_frequency",
    "exact_hhh",
    "inclusion_exclusion_formula",
    "lemma_2d_applies",
    "exact_conditioned_2d_identity_check",
]

MAX_ORACLE_KEYS = 1_000_000


def mst_sketch(hierarchy: Hierarchy, eps_a: float) -> RhhhSketch:
    """Update-all-levels sketch with ``ceil(1/eps_a)`` counters per level."""
    return RhhhSketch(hierarchy, capacity_for(eps_a), deterministic=True)


def _require_deterministic(sketch: RhhhSketch) -> None:
    if not sketch.deterministic:
        raise ValueError("MST updates need a sketch built with deterministic=True")


def mst_update(sketch: RhhhSketch, key) -> None:
    _require_deterministic(sketch)
    sketch.update(key)


def mst_update_many(sketch: RhhhSketch, keys: np.ndarray) -> None:
    _require_deterministic(sketch)
    sketch.update_many(keys)


@dataclass
class ExactFrequencyTable:
    """Exact counts of fully specified keys; ``keys`` sorted and distinct."""

    keys: np.ndarray
    counts: np.ndarray
    N: int = field(init=False)

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.uint64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.N = int(self.counts.sum())

    @classmethod
    def from_keys(cls, keys: np.ndarray) -> "ExactFrequencyTable":
        uniq, counts = np.unique(np.asarray(keys, dtype=np.uint64), return_counts=True)
        return cls(uniq, counts)

    @classmethod
    def from_counts(cls, counts: Mapping) -> "ExactFrequencyTable":
        packed = {}
        for k, c in counts.items():
            k = _as_packed(k)
            packed[k] = packed.get(k, 0) + int(c)
        items = sorted((k, c) for k, c in packed.items() if c)
        return cls(
            np.array([k for k, _ in items], dtype=np.uint64),
            np.array([c for _, c in items], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.keys)

    def items(self) -> Iterable[tuple[int, int]]:
        return zip(self.keys.tolist(), self.counts.tolist())

    def prefix_counts(self, node) -> tuple[np.ndarray, np.ndarray]:
        """Distinct generalized keys at ``node`` with their exact frequencies."""
        return _group(self.keys & np.uint64(node.mask), self.counts)


def _group(keys: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(keys, return_inverse=True)
    return uniq, np.bincount(inv, weights=weights, minlength=len(uniq)).astype(np.int64)


def exact_frequency(table: ExactFrequencyTable, p: Prefix) -> int:
    hit = (table.keys & np.uint64(p.pattern.mask)) == np.uint64(p.key)
    return int(table.counts[hit].sum())


def exact_conditioned_frequency(table: ExactFrequencyTable, p: Prefix, P: Iterable[Prefix]) -> int:
    """Traffic under ``p`` that no member of ``P`` generalizes.

    Set-based, key by key; slow but free of any lattice reasoning.
    """
    P = list(P)
    pm, pk = p.pattern.mask, p.key
    total = 0
    for e, c in table.items():
        if (e & pm) != pk:
            continue
        if any((e & h.pattern.mask) == h.key for h in P):
            continue
        total += c
    return total


@dataclass
class ExactHhhResult:
    """Cumulative per-level HHH sets; ``levels[l]`` is HHH_l."""

    levels: list[frozenset[Prefix]]
    conditioned: dict[Prefix, int]

    @property
    def hhh(self) -> frozenset[Prefix]:
        return self.levels[-1] if self.levels else frozenset()


def exact_hhh(table: ExactFrequencyTable, hierarchy: Hierarchy, theta: float) -> ExactHhhResult:
    """Exact hierarchical heavy hitters, built level by level.

    A key counts toward a candidate's conditioned frequency until some
    member selected at a lower level covers it.
    """
    if len(table) > MAX_ORACLE_KEYS:
        raise ValueError(f"exact oracle limited to {MAX_ORACLE_KEYS} distinct keys")
    threshold = theta * table.N
    covered = np.zeros(len(table), dtype=bool)
    selected: set[Prefix] = set()
    conditioned: dict[Prefix, int] = {}
    levels: list[frozenset[Prefix]] = []
    for _, nodes in hierarchy.levels():
        fresh = []
        free = ~covered
        for node in nodes:
            if table.N == 0:
                break
            prefixes, cond = _group(
                table.keys[free] & np.uint64(node.mask), table.counts[free]
            )
            for k, c in zip(prefixes.tolist(), cond.tolist()):
                if c >= threshold:
                    p = Prefix(node, k)
                    fresh.append(p)
                    conditioned[p] = c
        for p in fresh:
            covered |= (table.keys & np.uint64(p.pattern.mask)) == np.uint64(p.key)
        selected.update(fresh)
        levels.append(frozenset(selected))
    return ExactHhhResult(levels, conditioned)


def inclusion_exclusion_formula(table: ExactFrequencyTable, q: Prefix, P: Iterable[Prefix]) -> int:
    """``f_q - sum f_h + sum f_glb`` over the closest members below ``q``."""
    G = best_generalized(q, list(P))
    value = exact_frequency(table, q) - sum(exact_frequency(table, h) for h in G)
    for h, h2 in combinations(G, 2):
        g = glb(h, h2)
        if g is not NO_COMMON_DESCENDANT:
            value += exact_frequency(table, g)
    return value


def lemma_2d_applies(G: list[Prefix]) -> bool:
    """Second-order inclusion-exclusion is exact for ``G``.

    Requires an antichain in which no three members share a descendant, so
    pairwise overlaps are disjoint from each other.
    """
    for h, h2 in combinations(G, 2):
        if generalizes(h, h2) or generalizes(h2, h):
            return False
    for a, b, c in combinations(G, 3):
        g = glb(a, b)
        if g is not NO_COMMON_DESCENDANT and glb(g, c) is not NO_COMMON_DESCENDANT:
            return False
    return True


def exact_conditioned_2d_identity_check(
    table: ExactFrequencyTable, q: Prefix, P: Iterable[Prefix]
) -> bool:
    P = list(P)
    return exact_conditioned_frequency(table, q, P) == inclusion_exclusion_formula(table, q, P)
