"""Quality and speed measurements of an HHH output against the exact oracle.

Coverage uses the same conditioning as the exact HHH construction: an
excluded prefix ``q`` is conditioned on output members at strictly lower
levels, i.e. on the traffic already claimed by more specific selections.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .baselines import ExactFrequencyTable, _group, exact_hhh
from .hierarchy import Hierarchy, Prefix
from .sketch import HhhSet, RhhhSketch

__all__ = [
    "EvalReport",
    "evaluate",
    "nonzero_prefixes",
    "CheckpointSeries",
    "checkpoint_series",
    "BenchResult",
    "bench_update",
]


@dataclass
class EvalReport:
    accuracy_error_ratio: float
    coverage_errors: int
    coverage_error_prefixes: list[str]
    false_positive_rate: float
    output_size: int
    N: int
    wall_time: Optional[float] = None
    updates_per_second: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _coverage_misses(
    output: set[Prefix], exact: ExactFrequencyTable, hierarchy: Hierarchy, threshold: float
) -> list[Prefix]:
    covered = np.zeros(len(exact), dtype=bool)
    misses = []
    for _, nodes in hierarchy.levels():
        free = ~covered
        keys, counts = exact.keys[free], exact.counts[free]
        for node in nodes:
            prefixes, cond = _group(keys & np.uint64(node.mask), counts)
            for k in prefixes[cond >= threshold].tolist():
                p = Prefix(node, k)
                if p not in output:
                    misses.append(p)
        for p in output:
            if p.pattern in nodes:
                covered |= (exact.keys & np.uint64(p.pattern.mask)) == np.uint64(p.key)
    return misses


def nonzero_prefixes(exact: ExactFrequencyTable, hierarchy: Hierarchy) -> set[Prefix]:
    """Every prefix with positive exact frequency (the coverage universe)."""
    out = set()
    for node in hierarchy.nodes:
        out.update(Prefix(node, k) for k in np.unique(exact.keys & np.uint64(node.mask)).tolist())
    return out


def evaluate(
    output: HhhSet,
    exact: ExactFrequencyTable,
    hierarchy: Hierarchy,
    theta: float,
    epsilon: float,
) -> EvalReport:
    """Accuracy, coverage and false-positive rate of ``output``.

    An accuracy error is an output prefix whose upper bound misses the exact
    frequency by more than ``epsilon * N``.
    """
    if exact.N != output.N:
        raise ValueError(f"exact table has N={exact.N} but output has N={output.N}")
    N = exact.N
    prefixes = output.prefixes()

    bad = 0
    for e in output.entries:
        p = e.prefix
        hit = (exact.keys & np.uint64(p.pattern.mask)) == np.uint64(p.key)
        f = int(exact.counts[hit].sum())
        if abs(f - e.estimate.upper) > epsilon * N:
            bad += 1
    n_out = len(output.entries)

    misses = _coverage_misses(prefixes, exact, hierarchy, theta * N) if N else []
    truth = exact_hhh(exact, hierarchy, theta).hhh if N else frozenset()
    false_pos = sum(1 for p in prefixes if p not in truth)
    return EvalReport(
        accuracy_error_ratio=bad / n_out if n_out else 0.0,
        coverage_errors=len(misses),
        coverage_error_prefixes=sorted(str(p) for p in misses),
        false_positive_rate=false_pos / n_out if n_out else 0.0,
        output_size=n_out,
        N=N,
    )


@dataclass
class CheckpointSeries:
    points: list[tuple[int, EvalReport]] = field(default_factory=list)

    def append(self, N: int, report: EvalReport) -> None:
        if self.points and N <= self.points[-1][0]:
            raise ValueError("checkpoints must be strictly increasing")
        self.points.append((N, report))

    def to_dict(self) -> list[dict]:
        return [{"N": n, "report": r.to_dict()} for n, r in self.points]


def checkpoint_series(
    sketch: RhhhSketch,
    keys: np.ndarray,
    checkpoints: Sequence[int],
    theta: float,
    epsilon: float,
    delta: Optional[float] = None,
) -> CheckpointSeries:
    """Feed ``keys`` into ``sketch`` and evaluate after each checkpoint prefix."""
    series = CheckpointSeries()
    pos = 0
    for n in checkpoints:
        if n > len(keys):
            raise ValueError(f"checkpoint {n} exceeds stream length {len(keys)}")
        sketch.update_many(keys[pos:n])
        pos = n
        exact = ExactFrequencyTable.from_keys(keys[:n])
        series.append(n, evaluate(sketch.output(theta, delta), exact, sketch.hierarchy, theta, epsilon))
    return series


@dataclass
class BenchResult:
    algorithm: str
    hierarchy: str
    H: int
    V: int
    r: int
    capacity: int
    packets: int
    repetitions: int
    median_seconds: float
    min_seconds: float
    max_seconds: float
    updates_per_second: float
    spread: float

    def to_dict(self) -> dict:
        return asdict(self)


def _make(algorithm: str, hierarchy: Hierarchy, capacity: int, V, r: int, seed: int) -> RhhhSketch:
    if algorithm == "rhhh":
        return RhhhSketch(hierarchy, capacity, V=V, r=r, seed=seed)
    if algorithm == "mst":
        return RhhhSketch(hierarchy, capacity, deterministic=True)
    raise ValueError(f"cannot benchmark algorithm {algorithm!r}")


def bench_update(
    algorithm: str,
    keys: np.ndarray,
    hierarchy: Hierarchy,
    capacity: int,
    V: Optional[int] = None,
    r: int = 1,
    repetitions: int = 5,
    seed: int = 0,
    clock: Callable[[], float] = time.perf_counter,
) -> BenchResult:
    """Median update throughput over fresh sketches on an in-memory stream.

    ``spread`` is ``(max - min) / median`` of the wall times.
    """
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    # compile outside the timed region
    _make(algorithm, hierarchy, capacity, V, r, seed).update_many(keys[:1])
    times = []
    sketch = None
    for i in range(repetitions):
        sketch = _make(algorithm, hierarchy, capacity, V, r, seed + i)
        t0 = clock()
        sketch.update_many(keys)
        times.append(clock() - t0)
    med = statistics.median(times)
    n = len(keys)
    return BenchResult(
        algorithm=algorithm,
        hierarchy=hierarchy.name,
        H=hierarchy.H,
        V=sketch.V,
        r=sketch.r,
        capacity=capacity,
        packets=n,
        repetitions=repetitions,
        median_seconds=med,
        min_seconds=min(times),
        max_seconds=max(times),
        updates_per_second=n / med if n and med > 0 else 0.0,
        spread=(max(times) - min(times)) / med if med > 0 else 0.0,
    )
