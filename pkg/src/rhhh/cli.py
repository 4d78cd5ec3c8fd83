"""Command-line frontend.

    rhhh run   --algorithm rhhh --hierarchy 2d-byte --format zipf --packets 1000000
    rhhh bench --hierarchy 2d-byte --packets 10000000 --v-ratios 1,2,5,10
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .baselines import MAX_ORACLE_KEYS, ExactFrequencyTable, exact_hhh
from .calibration import derive, eps_s_of_N
from .hierarchy import HIERARCHY_NAMES, Hierarchy
from .metrics import bench_update, evaluate
from .sketch import FrequencyEstimate, HhhEntry, HhhSet, RhhhSketch
from .trace_io import SyntheticSpec, TraceFormatError, iter_key_chunks, load_keys, zipf_keys

log = logging.getLogger("rhhh")

ALGORITHMS = ("rhhh", "mst", "exact")


@dataclass
class RunConfig:
    algorithm: str = "rhhh"
    hierarchy: str = "1d-byte"
    epsilon: float = 0.01
    delta: float = 0.05
    theta: float = 0.05
    v_ratio: float = 1.0
    r: int = 1
    seed: int = 0
    input: Optional[str] = None
    format: str = "zipf"
    zipf_flows: int = 10_000
    zipf_s: float = 1.0
    packets: int = 1_000_000
    zipf_seed: int = 0
    checkpoints: list[int] = field(default_factory=list)
    out: Optional[str] = None
    timing: bool = False

    def validate(self) -> None:
        if self.v_ratio < 1:
            raise ValueError("--v-ratio must be at least 1")
        if self.checkpoints != sorted(set(self.checkpoints)) or any(c <= 0 for c in self.checkpoints):
            raise ValueError("--checkpoints must be positive and strictly increasing")
        if self.format in ("csv", "bin") and not self.input:
            raise ValueError(f"--format {self.format} needs --input")

    def V(self, H: int) -> int:
        # guard against 1.1 * 5 = 5.500000000000001 style rounding
        return math.ceil(round(self.v_ratio * H, 9))


def _key_chunks(cfg: RunConfig, hierarchy: Hierarchy) -> Iterator[np.ndarray]:
    one_dim = hierarchy.dims == 1
    if cfg.format == "zipf":
        spec = SyntheticSpec(cfg.zipf_flows, cfg.zipf_s, cfg.packets, cfg.zipf_seed)
        keys = zipf_keys(spec, one_dim)
        for i in range(0, len(keys), 1 << 20):
            yield keys[i : i + (1 << 20)]
    else:
        yield from iter_key_chunks(cfg.input, cfg.format, one_dim)


class _ExactCounts:
    """Running exact counts; gives up past the oracle's key limit."""

    def __init__(self, required: bool):
        self.keys = np.empty(0, dtype=np.uint64)
        self.counts = np.empty(0, dtype=np.int64)
        self.enabled = True
        self.required = required

    def add(self, chunk: np.ndarray) -> None:
        if not self.enabled:
            return
        uniq, cnt = np.unique(chunk, return_counts=True)
        keys = np.concatenate([self.keys, uniq])
        counts = np.concatenate([self.counts, cnt])
        self.keys, inv = np.unique(keys, return_inverse=True)
        self.counts = np.bincount(inv, weights=counts).astype(np.int64)
        if len(self.keys) > MAX_ORACLE_KEYS:
            if self.required:
                raise ValueError(f"exact algorithm limited to {MAX_ORACLE_KEYS} distinct keys")
            log.warning("more than %d distinct keys; oracle evaluation disabled", MAX_ORACLE_KEYS)
            self.enabled = False
            self.keys = self.counts = None

    def table(self) -> Optional[ExactFrequencyTable]:
        return ExactFrequencyTable(self.keys, self.counts) if self.enabled else None


def exact_output(table: ExactFrequencyTable, hierarchy: Hierarchy, theta: float) -> HhhSet:
    res = exact_hhh(table, hierarchy, theta)
    entries = []
    for lvl, _ in hierarchy.levels():
        fresh = res.levels[lvl] - (res.levels[lvl - 1] if lvl else frozenset())
        for p in sorted(fresh, key=lambda q: (q.pattern.index, q.key)):
            hit = (table.keys & np.uint64(p.pattern.mask)) == np.uint64(p.key)
            f = int(table.counts[hit].sum())
            entries.append(HhhEntry(p, FrequencyEstimate(f, f), float(res.conditioned[p])))
    return HhhSet(entries, table.N, {"hierarchy": hierarchy.name, "theta": theta})


def run(cfg: RunConfig) -> dict:
    cfg.validate()
    hierarchy = Hierarchy.by_name(cfg.hierarchy)
    H = hierarchy.H
    V = cfg.V(H)
    deterministic = cfg.algorithm != "rhhh"
    cal = derive(
        cfg.epsilon, cfg.delta, cfg.theta, V, cfg.r, H=H, deterministic=deterministic
    )
    sketch = None
    if cfg.algorithm != "exact":
        sketch = RhhhSketch.from_calibration(hierarchy, cal, seed=cfg.seed, deterministic=deterministic)
    exact = _ExactCounts(required=cfg.algorithm == "exact")

    def snapshot(N: int, elapsed: Optional[float]) -> dict:
        table = exact.table()
        if cfg.algorithm == "exact":
            out = exact_output(table, hierarchy, cfg.theta)
        else:
            out = sketch.output(cfg.theta)
        report = None
        if table is not None:
            report = evaluate(out, table, hierarchy, cfg.theta, cfg.epsilon)
            if elapsed is not None:
                report.wall_time = elapsed
                report.updates_per_second = N / elapsed if elapsed > 0 else 0.0
        randomized = cfg.algorithm == "rhhh"
        return {
            "N": N,
            "converged": (N >= cal.psi) if randomized else True,
            "eps_s_N": eps_s_of_N(cal.delta_s, V, N, cfg.r) if randomized and N > 0 else None,
            "hhh": [e.to_dict() for e in out.entries],
            "report": report.to_dict() if report else None,
        }

    checkpoints = []
    pending = list(cfg.checkpoints)
    N = 0
    elapsed = 0.0
    for chunk in _key_chunks(cfg, hierarchy):
        start = 0
        while start < len(chunk):
            stop = len(chunk)
            if pending and pending[0] - N < stop - start:
                stop = start + pending[0] - N
            part = chunk[start:stop]
            t0 = time.perf_counter()
            if sketch is not None:
                sketch.update_many(part)
            elapsed += time.perf_counter() - t0
            exact.add(part)
            N += len(part)
            start = stop
            if pending and pending[0] == N:
                checkpoints.append(snapshot(N, elapsed if cfg.timing else None))
                pending.pop(0)
    if pending:
        log.warning("stream ended at N=%d; skipped checkpoints %s", N, pending)

    params = {
        "algorithm": cfg.algorithm,
        "hierarchy": hierarchy.name,
        "H": H,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "theta": cfg.theta,
        "v_ratio": cfg.v_ratio,
        "V": V,
        "r": cfg.r,
        "seed": cfg.seed,
        "eps_a": cal.eps_a,
        "eps_s": cal.eps_s,
        "delta_s": cal.delta_s,
        "capacity": cal.capacity if sketch is not None else None,
        "input": {
            "format": cfg.format,
            "path": cfg.input,
            "zipf": {"flows": cfg.zipf_flows, "s": cfg.zipf_s, "packets": cfg.packets, "seed": cfg.zipf_seed}
            if cfg.format == "zipf"
            else None,
        },
    }
    return {
        "params": params,
        "psi": cal.psi,
        "checkpoints": checkpoints,
        "final": snapshot(N, elapsed if cfg.timing else None),
    }


def bench(cfg: RunConfig, algorithms: list[str], v_ratios: list[float], repetitions: int) -> dict:
    cfg.validate()
    hierarchy = Hierarchy.by_name(cfg.hierarchy)
    if cfg.format == "zipf":
        spec = SyntheticSpec(cfg.zipf_flows, cfg.zipf_s, cfg.packets, cfg.zipf_seed)
        keys = zipf_keys(spec, hierarchy.dims == 1)
    else:
        keys = load_keys(cfg.input, cfg.format, hierarchy.dims == 1)
    results = []
    for alg in algorithms:
        ratios = v_ratios if alg == "rhhh" else [1.0]
        for ratio in ratios:
            V = math.ceil(round(ratio * hierarchy.H, 9))
            deterministic = alg == "mst"
            cal = derive(cfg.epsilon, cfg.delta, cfg.theta, V, cfg.r, H=hierarchy.H, deterministic=deterministic)
            res = bench_update(
                alg, keys, hierarchy, cal.capacity, V=V, r=cfg.r, repetitions=repetitions, seed=cfg.seed
            )
            row = res.to_dict()
            row["v_ratio"] = ratio if alg == "rhhh" else None
            results.append(row)
    return {"hierarchy": hierarchy.name, "N": int(len(keys)), "results": results}


def _int_list(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hierarchy", choices=HIERARCHY_NAMES, default="1d-byte")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--theta", type=float, default=0.05)
    p.add_argument("--r", type=int, default=1, help="updates per packet")
    p.add_argument("--seed", type=int, default=0, help="sketch RNG seed")
    p.add_argument("--input", help="trace file for --format csv/bin")
    p.add_argument("--format", choices=("csv", "bin", "zipf"), default="zipf")
    p.add_argument("--zipf-flows", type=int, default=10_000)
    p.add_argument("--zipf-s", type=float, default=1.0)
    p.add_argument("--packets", type=lambda s: int(float(s)), default=1_000_000)
    p.add_argument("--zipf-seed", type=int, default=0)
    p.add_argument("--out", help="write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhhh", description="Hierarchical heavy hitters over packet traces")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="compute HHHs and evaluate them against the exact oracle")
    _add_common(run_p)
    run_p.add_argument("--algorithm", choices=ALGORITHMS, default="rhhh")
    run_p.add_argument("--v-ratio", type=float, default=1.0, help="V = ceil(v_ratio * H)")
    run_p.add_argument("--checkpoints", type=_int_list, default=[], help="N1,N2,... (e.g. 1e4,1e5)")
    run_p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical reruns)")

    bench_p = sub.add_parser("bench", help="update throughput of rhhh and mst")
    _add_common(bench_p)
    bench_p.add_argument("--algorithms", type=lambda s: s.split(","), default=["rhhh", "mst"])
    bench_p.add_argument("--v-ratios", type=_float_list, default=[1.0])
    bench_p.add_argument("--repetitions", type=int, default=5)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        algorithm=getattr(args, "algorithm", "rhhh"),
        hierarchy=args.hierarchy,
        epsilon=args.epsilon,
        delta=args.delta,
        theta=args.theta,
        v_ratio=getattr(args, "v_ratio", 1.0),
        r=args.r,
        seed=args.seed,
        input=args.input,
        format=args.format,
        zipf_flows=args.zipf_flows,
        zipf_s=args.zipf_s,
        packets=args.packets,
        zipf_seed=args.zipf_seed,
        checkpoints=getattr(args, "checkpoints", []),
        out=args.out,
        timing=getattr(args, "timing", False),
    )


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(format="rhhh: %(levelname)s: %(message)s", level=logging.WARNING)
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    try:
        if args.command == "run":
            result = run(cfg)
        else:
            bad = [a for a in args.algorithms if a not in ("rhhh", "mst")]
            if bad:
                raise ValueError(f"cannot benchmark {', '.join(bad)}")
            if args.repetitions < 1:
                raise ValueError("--repetitions must be at least 1")
            result = bench(cfg, args.algorithms, args.v_ratios, args.repetitions)
    except (ValueError, TraceFormatError, OSError) as exc:
        print(f"rhhh: error: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(result, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
