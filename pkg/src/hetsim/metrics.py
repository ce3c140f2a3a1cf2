"""Throughput metrics: per-stream FPS, speedup/slowdown and prediction error."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from hetsim.engine import SimConfig, SimResult
from hetsim.errors import MetricsError

US_PER_S = 1_000_000


@dataclass(frozen=True)
class StreamFps:
    stream_id: int
    fps: float
    frames_counted: int


def warmup_frames(frames: int, warmup_fraction: float) -> int:
    # guard against 0.1 * 30 == 3.0000000000000004
    return math.ceil(round(warmup_fraction * frames, 9))


def fps_per_stream(result: SimResult, cfg: SimConfig) -> list[StreamFps]:
    """Steady-state FPS of each stream.

    The first ``ceil(warmup_fraction * F)`` completions are dropped. The
    window runs from the last dropped completion (or time 0 when nothing
    is dropped) to the last completion.
    """
    skip = warmup_frames(result.frames_per_stream, cfg.warmup_fraction)
    out = []
    for stream, times in sorted(result.per_stream_completion.items()):
        times = sorted(times)
        counted = len(times) - skip
        if counted < 2:
            raise MetricsError(f"stream {stream}: {counted} completion(s) after warm-up, need >= 2")
        t0 = times[skip - 1] if skip else 0
        window = times[-1] - t0
        if window <= 0:
            raise MetricsError(f"stream {stream}: zero-length measurement window")
        out.append(StreamFps(stream, counted * US_PER_S / window, counted))
    return out


def mean_fps(values: Sequence[StreamFps]) -> float:
    if not values:
        raise MetricsError("no streams")
    return math.fsum(v.fps for v in values) / len(values)


def aggregate_fps(values: Sequence[StreamFps]) -> float:
    return math.fsum(v.fps for v in values)


def speedup(baseline: Sequence[StreamFps], variant: Sequence[StreamFps]) -> float:
    if len(baseline) != len(variant):
        raise MetricsError(f"stream counts differ: {len(baseline)} vs {len(variant)}")
    base = mean_fps(baseline)
    if base == 0:
        raise MetricsError("baseline mean FPS is zero")
    return mean_fps(variant) / base


@dataclass(frozen=True)
class ComparisonPoint:
    x: int | str
    baseline_fps: float
    variant_fps: float
    ratio: float


@dataclass(frozen=True)
class ComparisonReport:
    """Paired baseline/variant curve.

    ``ratio_kind`` is ``"slowdown"`` (baseline / variant, > 1 means the
    variant is slower) or ``"speedup"`` (variant / baseline).
    """

    baseline_label: str
    variant_label: str
    points: tuple[ComparisonPoint, ...]
    ratio_kind: str = "slowdown"

    def ratios(self) -> dict:
        return {p.x: p.ratio for p in self.points}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"x,{self.baseline_label}_fps,{self.variant_label}_fps,{self.ratio_kind}\n")
        for p in self.points:
            buf.write(f"{p.x},{p.baseline_fps:.6f},{p.variant_fps:.6f},{p.ratio:.6f}\n")
        return buf.getvalue()


def _paired(baseline: Mapping, variant: Mapping) -> list:
    if set(baseline) != set(variant):
        raise MetricsError(f"x-axes differ: {sorted(baseline)} vs {sorted(variant)}")
    return sorted(baseline)


def slowdown_curve(baseline_sweep: Mapping, variant_sweep: Mapping,
                   baseline_label: str = "baseline", variant_label: str = "variant") -> ComparisonReport:
    points = []
    for x in _paired(baseline_sweep, variant_sweep):
        b, v = float(baseline_sweep[x]), float(variant_sweep[x])
        if v <= 0:
            raise MetricsError(f"variant FPS at {x} is {v}; slowdown undefined")
        points.append(ComparisonPoint(x, b, v, b / v))
    return ComparisonReport(baseline_label, variant_label, tuple(points), "slowdown")


def speedup_curve(baseline_sweep: Mapping, variant_sweep: Mapping,
                  baseline_label: str = "baseline", variant_label: str = "variant") -> ComparisonReport:
    points = []
    for x in _paired(baseline_sweep, variant_sweep):
        b, v = float(baseline_sweep[x]), float(variant_sweep[x])
        if b <= 0:
            raise MetricsError(f"baseline FPS at {x} is {b}; speedup undefined")
        points.append(ComparisonPoint(x, b, v, v / b))
    return ComparisonReport(baseline_label, variant_label, tuple(points), "speedup")


def prediction_error(predicted: Sequence[StreamFps], measured: Sequence[StreamFps]) -> float:
    """Mean over streams of ``|predicted - measured| / measured``."""
    pred = {p.stream_id: p.fps for p in predicted}
    meas = {m.stream_id: m.fps for m in measured}
    if set(pred) != set(meas) or not pred:
        raise MetricsError(f"stream sets differ: {sorted(pred)} vs {sorted(meas)}")
    errs = []
    for s in sorted(meas):
        if meas[s] == 0:
            raise MetricsError(f"measured FPS of stream {s} is zero")
        errs.append(abs(pred[s] - meas[s]) / meas[s])
    return math.fsum(errs) / len(errs)


@dataclass(frozen=True)
class CurveError:
    mean: float
    max: float
    per_point: dict = field(default_factory=dict)


def curve_error(predicted: Mapping[int, float], measured: Mapping[int, float]) -> CurveError:
    """Relative error of a predicted FPS-vs-streams curve at every measured point."""
    if not measured:
        raise MetricsError("no measured points")
    missing = sorted(set(measured) - set(predicted))
    if missing:
        raise MetricsError(f"no prediction for stream counts {missing}")
    per = {}
    for x in sorted(measured):
        m = float(measured[x])
        if m == 0:
            raise MetricsError(f"measured FPS at {x} streams is zero")
        per[x] = abs(float(predicted[x]) - m) / m
    return CurveError(math.fsum(per.values()) / len(per), max(per.values()), per)


# -- export ----------------------------------------------------------------------


def fps_csv(rows: Iterable[tuple[int, StreamFps]]) -> str:
    buf = io.StringIO()
    buf.write("streams,stream_id,fps\n")
    for streams, f in rows:
        buf.write(f"{streams},{f.stream_id},{f.fps:.6f}\n")
    return buf.getvalue()


def summary_dict(values: Sequence[StreamFps], utilization: Mapping[str, float] | None = None) -> dict:
    return {
        "mean_fps": mean_fps(values),
        "aggregate_fps": aggregate_fps(values),
        "per_stream": {str(v.stream_id): v.fps for v in values},
        "utilization": dict(utilization or {}),
    }


def summary_json(values: Sequence[StreamFps], utilization: Mapping[str, float] | None = None) -> str:
    return json.dumps(summary_dict(values, utilization), indent=2, sort_keys=True) + "\n"


def read_measured_csv(text: str) -> dict[int, float]:
    """Parse a ``streams,fps`` file of measured per-stream FPS."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or [h.strip() for h in lines[0].split(",")] != ["streams", "fps"]:
        raise MetricsError("measured data must start with header 'streams,fps'")
    out = {}
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        try:
            out[int(parts[0])] = float(parts[1])
        except (ValueError, IndexError):
            raise MetricsError(f"measured data line {i}: cannot parse {ln!r}") from None
    return out
