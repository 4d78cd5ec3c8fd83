"""Space Saving counters with worst-case O(1) increments.

Each table keeps at most ``capacity`` keys.  A resident key reports
``(count, count - overestimation)`` as upper and lower bounds on how many
times it was incremented; an absent key on a full table is bounded above by
the minimum count.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import _kernels

__all__ = ["CounterBank", "SpaceSaving", "HeavyEntry"]


class HeavyEntry(NamedTuple):
    key: int
    upper: int
    lower: int


class CounterBank:
    """``tables`` independent Space Saving tables sharing one capacity."""

    def __init__(self, tables: int, capacity: int):
        if tables < 1 or capacity < 1:
            raise ValueError("need at least one table with capacity >= 1")
        self.tables = tables
        self.capacity = capacity
        self.state = _kernels.new_bank(tables, capacity)

    def increment(self, t: int, key: int) -> None:
        _kernels.increment_many(self.state, t, np.array([key], dtype=np.uint64))

    def increment_many(self, t: int, keys) -> None:
        _kernels.increment_many(self.state, t, np.ascontiguousarray(keys, dtype=np.uint64))

    def query(self, t: int, key: int) -> tuple[int, int]:
        upper, lower = _kernels.query(self.state, t, np.uint64(key))
        return int(upper), int(lower)

    def arrays(self, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Resident keys with their upper and lower bounds, in slot order."""
        return _kernels.entries(self.state, t)

    def heavy_entries(self, t: int) -> list[HeavyEntry]:
        keys, upper, lower = self.arrays(t)
        return [HeavyEntry(*row) for row in zip(keys.tolist(), upper.tolist(), lower.tolist())]

    def total_updates(self, t: int) -> int:
        return int(self.state[5][t, _kernels.TOTAL])

    def size(self, t: int) -> int:
        return int(self.state[5][t, _kernels.SIZE])

    def min_count(self, t: int) -> int:
        """Smallest resident count, 0 for an empty table."""
        mb = self.state[5][t, _kernels.MINB]
        return 0 if mb == -1 else int(self.state[2][t, _kernels.CNT, mb])


class SpaceSaving:
    """A single table; thin view over a one-table :class:`CounterBank`."""

    def __init__(self, capacity: int):
        self._bank = CounterBank(1, capacity)

    @property
    def capacity(self) -> int:
        return self._bank.capacity

    @property
    def total_updates(self) -> int:
        return self._bank.total_updates(0)

    def __len__(self) -> int:
        return self._bank.size(0)

    def increment(self, key: int) -> None:
        self._bank.increment(0, key)

    def increment_many(self, keys) -> None:
        self._bank.increment_many(0, keys)

    def query(self, key: int) -> tuple[int, int]:
        return self._bank.query(0, key)

    def heavy_entries(self) -> list[HeavyEntry]:
        return self._bank.heavy_entries(0)

    def min_count(self) -> int:
        return self._bank.min_count(0)
