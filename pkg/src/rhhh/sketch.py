"""Randomized hierarchical heavy hitters.

Every packet draws ``r`` levels uniformly from ``[0, V)``; each draw that
lands on a lattice node (``d < H``) increments that node's Space Saving table
with the packet's key masked to the node.  Estimates are scaled back by
``V / r``.  Output walks the lattice from fully specified to fully general
and keeps every prefix whose conservative conditioned-frequency estimate
reaches ``theta * N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterator, Mapping, Optional, Union

import numpy as np

from . import _kernels
from .calibration import Calibration, probit
from .hierarchy import (
    NO_COMMON_DESCENDANT,
    Hierarchy,
    Prefix,
    PrefixIndex,
    _lattice,
    best_generalized,
    glb,
)
from .space_saving import CounterBank

__all__ = [
    "SeededRng",
    "FrequencyEstimate",
    "HhhEntry",
    "HhhSet",
    "RhhhSketch",
    "correction",
    "calc_pred_1d",
    "calc_pred_2d",
]

Number = Union[int, Fraction]

QUANTILES = ("proof", "algorithm")


class SeededRng:
    """SplitMix64 with unbiased bounded draws; the state lives in a numpy cell
    so compiled loops can advance it in place."""

    def __init__(self, seed: int = 0):
        self.state = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)

    def bounded(self, n: int, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.int64)
        _kernels.rng_fill(self.state, n, out)
        return out


@dataclass(frozen=True)
class FrequencyEstimate:
    upper: Number
    lower: Number


@dataclass(frozen=True)
class HhhEntry:
    prefix: Prefix
    estimate: FrequencyEstimate
    conditioned_estimate: float

    def to_dict(self) -> dict:
        return {
            "prefix": str(self.prefix),
            "level": self.prefix.level,
            "lower": _jsonable(self.estimate.lower),
            "upper": _jsonable(self.estimate.upper),
            "conditioned": _jsonable(self.conditioned_estimate),
        }


def _jsonable(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


@dataclass
class HhhSet:
    entries: list[HhhEntry]
    N: int
    params: dict = field(default_factory=dict)

    def prefixes(self) -> set[Prefix]:
        return {e.prefix for e in self.entries}

    def __contains__(self, p: Prefix) -> bool:
        return any(e.prefix == p for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[HhhEntry]:
        return iter(self.entries)

    def to_dict(self) -> dict:
        return {"N": self.N, "hhh": [e.to_dict() for e in self.entries]}


def correction(N: int, V: int, delta: float, r: int = 1, quantile: str = "proof") -> float:
    """Sampling allowance added to every conditioned-frequency estimate.

    ``quantile="proof"`` uses Z at ``1 - delta/8``; ``"algorithm"`` uses the
    smaller Z at ``1 - delta``.  With ``r`` draws per packet the sample is ``r``
    times denser, which shrinks the allowance by ``sqrt(r)``.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if quantile not in QUANTILES:
        raise ValueError(f"quantile must be one of {QUANTILES}")
    if N <= 0:
        return 0.0
    q = 1 - delta / 8 if quantile == "proof" else 1 - delta
    return 2 * probit(q) * math.sqrt(N * V / r)


def calc_pred_1d(p: Prefix, P, lower: Mapping[Prefix, Number]) -> Number:
    """Minus the lower bounds of the closest selected descendants of ``p``."""
    return -sum((lower[h] for h in best_generalized(p, P)), 0)


def calc_pred_2d(
    p: Prefix,
    P,
    lower: Mapping[Prefix, Number],
    upper: Callable[[Prefix], Number],
) -> Number:
    """Inclusion-exclusion over the closest selected descendants of ``p``.

    Each pair adds back the upper bound of its glb, unless a third member of
    the group already contains that glb.
    """
    G = best_generalized(p, P)
    R: Number = -sum((lower[h] for h in G), 0)
    if len(G) < 2:
        return R
    members = set(G)
    lattice = _lattice(p.pattern.unit_bits, p.pattern.width // p.pattern.unit_bits, p.pattern.dims)
    for h, h2 in combinations(G, 2):
        q = glb(h, h2)
        if q is NO_COMMON_DESCENDANT:
            continue
        covering = (q.pattern,) + lattice.strict_ancestors[q.pattern.index]
        if any(
            (c := Prefix(a, q.key & a.mask)) in members and c != h and c != h2 for a in covering
        ):
            continue
        R += upper(q)
    return R


class RhhhSketch:
    """H Space Saving tables fed by randomized single-level updates.

    With ``deterministic=True`` every packet updates every level, estimates
    are unscaled and no sampling allowance is added; this is the classical
    update-all-levels baseline sharing the same Output code.
    """

    def __init__(
        self,
        hierarchy: Hierarchy,
        capacity: int,
        V: Optional[int] = None,
        r: int = 1,
        seed: int = 0,
        deterministic: bool = False,
        delta: Optional[float] = None,
        quantile: str = "proof",
    ):
        H = hierarchy.H
        V = H if V is None else int(V)
        if V < H:
            raise ValueError(f"V={V} must be at least H={H}")
        if V >= 2**32:
            raise ValueError("V must fit in 32 bits")
        if not 1 <= r <= V:
            raise ValueError(f"r={r} must lie in [1, V]")
        if quantile not in QUANTILES:
            raise ValueError(f"quantile must be one of {QUANTILES}")
        self.hierarchy = hierarchy
        self.V = V
        self.r = int(r)
        self.seed = seed
        self.deterministic = deterministic
        self.delta = delta
        self.quantile = quantile
        self.N = 0
        self.tables = CounterBank(H, capacity)
        self.rng = SeededRng(seed)
        self._masks = hierarchy.masks
        if deterministic:
            self.scale: Number = 1
        else:
            s = Fraction(V, self.r)
            self.scale = int(s) if s.denominator == 1 else s

    @classmethod
    def from_calibration(
        cls, hierarchy: Hierarchy, cal: Calibration, seed: int = 0, deterministic: bool = False
    ) -> "RhhhSketch":
        return cls(
            hierarchy,
            cal.capacity,
            V=cal.V,
            r=cal.r,
            seed=seed,
            deterministic=deterministic,
            delta=cal.delta,
        )

    @property
    def H(self) -> int:
        return self.hierarchy.H

    @property
    def capacity(self) -> int:
        return self.tables.capacity

    def update(self, key) -> None:
        if isinstance(key, tuple):
            key = (key[0] << 32) | key[1]
        self.update_many(np.array([key], dtype=np.uint64))

    def update_many(self, keys: np.ndarray) -> None:
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        if self.deterministic:
            _kernels.feed_all_levels(self.tables.state, self._masks, keys)
        else:
            _kernels.feed_randomized(
                self.tables.state, self._masks, keys, self.rng.state, self.V, self.r
            )
        self.N += len(keys)

    def apply_draws(self, keys: np.ndarray, draws: np.ndarray) -> None:
        """Replay updates with explicit level draws, ``r`` per packet."""
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        draws = np.ascontiguousarray(draws, dtype=np.int64)
        if draws.shape != (len(keys) * self.r,):
            raise ValueError("need exactly r draws per packet")
        if ((draws < 0) | (draws >= self.V)).any():
            raise ValueError("draws must lie in [0, V)")
        _kernels.feed_draws(self.tables.state, self._masks, keys, draws, self.r)
        self.N += len(keys)

    def frequency(self, p: Prefix) -> FrequencyEstimate:
        upper, lower = self.tables.query(p.pattern.index, p.key)
        return FrequencyEstimate(upper * self.scale, lower * self.scale)

    def correction(self, delta: Optional[float] = None) -> float:
        if self.deterministic:
            return 0.0
        delta = self._delta(delta)
        return correction(self.N, self.V, delta, self.r, self.quantile)

    def _delta(self, delta: Optional[float]) -> float:
        delta = self.delta if delta is None else delta
        if delta is None:
            raise ValueError("delta is required for a randomized sketch")
        return delta

    def output(self, theta: float, delta: Optional[float] = None) -> HhhSet:
        if not 0 < theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {theta}")
        corr = self.correction(delta)
        params = {
            "hierarchy": self.hierarchy.name,
            "H": self.H,
            "V": self.V,
            "r": self.r,
            "capacity": self.capacity,
            "deterministic": self.deterministic,
            "theta": theta,
            "delta": None if self.deterministic else self._delta(delta),
            "quantile": self.quantile,
            "correction": corr,
        }
        if self.N == 0:
            return HhhSet([], 0, params)

        threshold = theta * self.N
        one_dim = self.hierarchy.dims == 1
        selected = PrefixIndex(self.hierarchy)
        lower: dict[Prefix, Number] = {}
        upper_of = lambda q: self.frequency(q).upper  # noqa: E731
        entries: list[HhhEntry] = []
        for _, nodes in self.hierarchy.levels():
            for node in nodes:
                keys, up, lo = self.tables.arrays(node.index)
                order = np.argsort(keys, kind="stable")
                for key, u, l in zip(keys[order].tolist(), up[order].tolist(), lo[order].tolist()):
                    f_up = u * self.scale
                    # in 1D the predecessor term is never positive
                    if one_dim and f_up + corr < threshold:
                        continue
                    p = Prefix(node, key)
                    if one_dim:
                        pred = calc_pred_1d(p, selected, lower)
                    else:
                        pred = calc_pred_2d(p, selected, lower, upper_of)
                    c_hat = f_up + pred + corr
                    if c_hat >= threshold:
                        selected.add(p)
                        lower[p] = l * self.scale
                        entries.append(
                            HhhEntry(p, FrequencyEstimate(f_up, l * self.scale), float(c_hat))
                        )
        return HhhSet(entries, self.N, params)

    def __repr__(self) -> str:
        mode = "deterministic" if self.deterministic else f"V={self.V}, r={self.r}"
        return f"RhhhSketch({self.hierarchy.name}, capacity={self.capacity}, {mode}, N={self.N})"
