"""What-if studies: stream-count sweeps, A/B module impact, optimization payoff.

Replicate ``r`` of every point runs with seed ``cfg.seed + r``. A/B studies
reuse exactly those seeds on both sides, so a no-op modification gives a
ratio of exactly 1.0.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from hetsim.distributions import ServiceDistribution
from hetsim.engine import SimConfig, simulate
from hetsim.errors import HetsimError
from hetsim.graph import FlowGraphSpec, Modification, apply_modification, check, instantiate
from hetsim.metrics import (ComparisonReport, StreamFps, aggregate_fps, fps_per_stream, mean_fps,
                            slowdown_curve, speedup)

Z95 = 1.959963984540054


class StudyError(HetsimError):
    def __init__(self, message: str, streams: int, replicate: int):
        super().__init__(f"streams={streams} replicate={replicate}: {message}")
        self.streams = streams
        self.replicate = replicate


@dataclass(frozen=True)
class SweepSpec:
    base_spec: FlowGraphSpec
    cfg: SimConfig
    stream_counts: tuple[int, ...]
    replications: int = 5

    def __post_init__(self):
        counts = tuple(sorted(set(self.stream_counts)))
        if not counts or counts[0] < 1:
            raise HetsimError(f"stream_counts must be non-empty positive integers, got {self.stream_counts!r}")
        if self.replications < 1:
            raise HetsimError("replications must be >= 1")
        object.__setattr__(self, "stream_counts", counts)

    def seed(self, replicate: int) -> int:
        return (self.cfg.seed + replicate) % 2**64


@dataclass(frozen=True)
class PointSummary:
    streams: int
    mean_fps_per_stream: float
    ci95_halfwidth: float
    aggregate_fps: float


@dataclass
class StudyResult:
    points: dict[tuple[int, int], list[StreamFps]]
    summary: dict[int, PointSummary] = field(default_factory=dict)

    def curve(self) -> dict[int, float]:
        return {s: p.mean_fps_per_stream for s, p in self.summary.items()}

    def rows(self):
        """``(streams, StreamFps)`` rows ordered by streams, replicate, stream id."""
        for key in sorted(self.points):
            for f in self.points[key]:
                yield key[0], f


def run_point(spec: FlowGraphSpec, cfg: SimConfig, streams: int) -> list[StreamFps]:
    result = simulate(instantiate(spec, streams), cfg)
    return fps_per_stream(result, cfg)


def _task(args) -> tuple[tuple[int, int], list[StreamFps]]:
    spec, cfg, streams, rep = args
    try:
        return (streams, rep), run_point(spec, cfg, streams)
    except HetsimError as exc:
        raise StudyError(str(exc), streams, rep) from exc


def _summarize(points: dict[tuple[int, int], list[StreamFps]]) -> dict[int, PointSummary]:
    by_streams: dict[int, list[list[StreamFps]]] = {}
    for (s, r) in sorted(points):
        by_streams.setdefault(s, []).append(points[(s, r)])
    out = {}
    for s, reps in by_streams.items():
        means = [mean_fps(v) for v in reps]
        half = Z95 * statistics.stdev(means) / math.sqrt(len(means)) if len(means) > 1 else 0.0
        out[s] = PointSummary(s, math.fsum(means) / len(means), half,
                              math.fsum(aggregate_fps(v) for v in reps) / len(reps))
    return out


def run_sweep(sweep: SweepSpec, jobs: int = 1) -> StudyResult:
    """Simulate every (stream count, replicate) pair; ``jobs > 1`` uses processes."""
    check(sweep.base_spec)
    sim_cfg = replace(sweep.cfg, record_events=False)
    tasks = [(sweep.base_spec, replace(sim_cfg, seed=sweep.seed(r)), s, r)
             for s in sweep.stream_counts for r in range(sweep.replications)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    points = dict(results)
    return StudyResult(points, _summarize(points))


def run_ab_study(base: FlowGraphSpec, mod: Modification, sweep: SweepSpec,
                 jobs: int = 1) -> ComparisonReport:
    variant = apply_modification(base, mod)
    base_res = run_sweep(replace(sweep, base_spec=base), jobs)
    var_res = run_sweep(replace(sweep, base_spec=variant), jobs)
    return slowdown_curve(base_res.curve(), var_res.curve(), "baseline", mod.kind)


def run_optimization_study(base: FlowGraphSpec, node: str, ideal: bool = True,
                           measured_overhead: ServiceDistribution | None = None,
                           streams: int = 6, cfg: SimConfig = SimConfig(),
                           replications: int = 1) -> dict[str, float]:
    """Speedup from replacing ``node``'s service time.

    ``ideal`` zeroes the node (upper bound); ``measured_overhead`` replaces
    it with a benchmarked distribution (realistic estimate). Speedups are
    mean per-stream FPS ratios, pooled over replicates.
    """
    if not ideal and measured_overhead is None:
        raise HetsimError("run_optimization_study needs ideal=True or a measured_overhead distribution")
    base.node(node)
    variants = {}
    if ideal:
        variants["ideal_speedup"] = apply_modification(base, Modification.zero_node(node))
    if measured_overhead is not None:
        variants["real_speedup"] = apply_modification(
            base, Modification.set_distribution(node, measured_overhead))

    sim_cfg = replace(cfg, record_events=False)
    seeds = [(cfg.seed + r) % 2**64 for r in range(replications)]

    def pooled(spec: FlowGraphSpec) -> list[StreamFps]:
        out = []
        for r, seed in enumerate(seeds):
            try:
                out.extend(run_point(spec, replace(sim_cfg, seed=seed), streams))
            except HetsimError as exc:
                raise StudyError(str(exc), streams, r) from exc
        return out

    baseline = pooled(base)
    return {key: speedup(baseline, pooled(spec)) for key, spec in variants.items()}
