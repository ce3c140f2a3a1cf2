"""Command-line front end.

Exit codes: 0 success, 1 domain error (one ``error: ...`` line on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import defaultdict
from pathlib import Path

from hetsim import __version__
from hetsim._io import write_outputs
from hetsim.charts import Series, render_svg
from hetsim.distributions import load_distribution
from hetsim.engine import SimConfig, detect_bottleneck, simulate
from hetsim.errors import HetsimError
from hetsim.graph import instantiate, load_modification, load_pipeline, spec_from_json, validate
from hetsim.metrics import (curve_error, fps_csv, fps_per_stream, read_measured_csv, slowdown_curve,
                            summary_json)
from hetsim.scenarios import SweepSpec, run_ab_study, run_optimization_study, run_sweep
from hetsim.traces import build_distributions, bundle_files, dump_bundle, load_trace

SEED_ENV = "HETSIM_SEED"


def parse_streams(text: str) -> list[int]:
    """``"1..4,8,12"`` -> ``[1, 2, 3, 4, 8, 12]``."""
    out: set[int] = set()
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = (int(x) for x in part.split("..", 1))
                if lo > hi:
                    raise ValueError
                out.update(range(lo, hi + 1))
            else:
                out.add(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid stream range {text!r} (use a..b or a,b,c)") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"stream counts must be positive: {text!r}")
    return sorted(out)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError("warm-up fraction must be in [0, 1)")
    return v


def _sim_flags(p: argparse.ArgumentParser, streams_help: str, range_ok: bool = True) -> None:
    p.add_argument("--pipeline", required=True, metavar="PATH", help="pipeline spec JSON file")
    p.add_argument("--streams", type=parse_streams if range_ok else _positive_int, default=None,
                   metavar="RANGE" if range_ok else "N", help=streams_help)
    p.add_argument("--workers", type=_positive_int, default=12, metavar="N",
                   help="CPU worker pool size (default 12)")
    p.add_argument("--frames", type=_positive_int, default=1000, metavar="N",
                   help="frames per stream (default 1000)")
    p.add_argument("--seed", type=_seed, default=None, metavar="N",
                   help=f"random seed (default ${SEED_ENV}, else 0)")
    p.add_argument("--warmup", type=_fraction, default=0.10, metavar="FRAC",
                   help="fraction of frames excluded as warm-up (default 0.10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetsim", description="Simulate heterogeneous CPU/GPU flow-graph pipelines.")
    parser.add_argument("--version", action="version", version=f"hetsim {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    p = sub.add_parser("validate", help="check a pipeline spec")
    p.add_argument("--pipeline", required=True, metavar="PATH", help="pipeline spec JSON file")

    p = sub.add_parser("ingest", help="build empirical distributions from a trace CSV")
    p.add_argument("--trace", required=True, metavar="PATH", help="trace CSV (node,stream,start_us,end_us)")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="combined JSON map, or a directory with --per-node")
    p.add_argument("--per-node", action="store_true", help="write one distribution file per node")

    p = sub.add_parser("run", help="simulate one configuration")
    _sim_flags(p, "number of streams (default 1)", range_ok=False)
    p.add_argument("--out", metavar="PATH", help="write the metric summary JSON here")
    p.add_argument("--events", metavar="PATH", help="write the event log CSV here")

    p = sub.add_parser("sweep", help="FPS per stream across stream counts")
    _sim_flags(p, "stream counts, e.g. 1..12 or 1,2,4 (default 1..12)")
    p.add_argument("--replications", type=_positive_int, default=5, metavar="N",
                   help="replicates per point, seeds seed+r (default 5)")
    p.add_argument("--out", metavar="PATH", help="CSV streams,stream_id,fps")
    p.add_argument("--chart", metavar="PATH", help="SVG chart of FPS per stream vs streams")
    p.add_argument("--measured", metavar="PATH", help="measured CSV streams,fps; prints prediction error")
    p.add_argument("--jobs", type=_positive_int, default=1, metavar="N", help="parallel processes")

    p = sub.add_parser("ab", help="slowdown caused by a modification across stream counts")
    _sim_flags(p, "stream counts (default 1..12)")
    p.add_argument("--modification", required=True, metavar="PATH", help="modification JSON file")
    p.add_argument("--replications", type=_positive_int, default=5, metavar="N",
                   help="replicates per point (default 5)")
    p.add_argument("--out", metavar="PATH", help="CSV of baseline/variant FPS and slowdown")
    p.add_argument("--chart", metavar="PATH", help="SVG chart of both curves")
    p.add_argument("--jobs", type=_positive_int, default=1, metavar="N", help="parallel processes")

    p = sub.add_parser("optimize", help="speedup from replacing one node's service time")
    _sim_flags(p, "number of streams (default 6)", range_ok=False)
    p.add_argument("--node", required=True, metavar="NAME", help="node to optimize")
    p.add_argument("--ideal", action="store_true", help="zero the node's service time")
    p.add_argument("--overhead", metavar="PATH", help="distribution file with the measured overhead")
    p.add_argument("--replications", type=_positive_int, default=1, metavar="N",
                   help="replicates pooled into each speedup (default 1)")
    p.add_argument("--out", metavar="PATH", help="write speedups as JSON here")

    p = sub.add_parser("compare", help="compare a sweep CSV against another sweep or measured data")
    p.add_argument("--baseline", required=True, metavar="PATH", help="sweep CSV streams,stream_id,fps")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--variant", metavar="PATH", help="second sweep CSV; reports slowdown")
    group.add_argument("--measured", metavar="PATH", help="measured CSV streams,fps; reports error")
    p.add_argument("--out", metavar="PATH", help="write the comparison CSV here")
    p.add_argument("--chart", metavar="PATH", help="SVG chart of both curves")

    p = sub.add_parser("report", help="render sweep CSVs as a chart and text table")
    p.add_argument("--input", required=True, action="append", metavar="PATH",
                   help="sweep CSV (repeatable)")
    p.add_argument("--chart", metavar="PATH", help="SVG chart")
    p.add_argument("--out", metavar="PATH", help="markdown table")
    return parser


def _resolve_seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as exc:
        raise HetsimError(f"{SEED_ENV}: {exc}") from None


def _config(args) -> SimConfig:
    return SimConfig(cpu_workers=args.workers, frames_per_stream=args.frames,
                     seed=_resolve_seed(args.seed), warmup_fraction=args.warmup)


def _read_sweep_csv(path: str) -> dict[int, float]:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or lines[0] != "streams,stream_id,fps":
        raise HetsimError(f"{path}: expected header 'streams,stream_id,fps'")
    acc: dict[int, list[float]] = defaultdict(list)
    for i, ln in enumerate(lines[1:], start=2):
        try:
            s, _, fps = ln.split(",")
            acc[int(s)].append(float(fps))
        except ValueError:
            raise HetsimError(f"{path}: line {i}: cannot parse {ln!r}") from None
    return {s: sum(v) / len(v) for s, v in sorted(acc.items())}


def _curve_series(label: str, curve: dict[int, float], ci: dict[int, float] | None = None) -> Series:
    xs = sorted(curve)
    return Series(label, xs, [curve[x] for x in xs], [ci[x] for x in xs] if ci else None)


def _chart(series, title: str) -> str:
    return render_svg(series, "line", title=title, x_label="number of video streams",
                      y_label="FPS per video stream")


# -- verbs -----------------------------------------------------------------------


def cmd_validate(args) -> int:
    obj = json.loads(Path(args.pipeline).read_text(encoding="utf-8"))
    result = validate(spec_from_json(obj))
    if result.ok:
        print("ok")
        return 0
    for msg in result.messages():
        print(msg)
    raise HetsimError(f"{len(result.violations)} violation(s) in {args.pipeline}")


def cmd_ingest(args) -> int:
    bundle = build_distributions(load_trace(args.trace))
    if args.per_node:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_outputs({out / name: text for name, text in bundle_files(bundle).items()})
    else:
        write_outputs({Path(args.out): dump_bundle(bundle)})
    for name, n in bundle.sample_counts.items():
        print(f"{name}: {n} samples, mean {bundle.per_node[name].mean():.1f} us")
    return 0


def cmd_run(args) -> int:
    spec = load_pipeline(args.pipeline)
    cfg = _config(args)
    graph = instantiate(spec, args.streams or 1)
    result = simulate(graph, cfg)
    fps = fps_per_stream(result, cfg)
    ranking = detect_bottleneck(result, graph, cfg.warmup_fraction)
    util = {name: round(u, 6) for name, u in ranking}
    outputs = {}
    if args.out:
        outputs[Path(args.out)] = summary_json(fps, util)
    if args.events:
        outputs[Path(args.events)] = result.events_csv()
    write_outputs(outputs)
    for f in fps:
        print(f"stream={f.stream_id} fps={f.fps:.3f}")
    print(f"aggregate_fps={sum(f.fps for f in fps):.3f}")
    print(f"bottleneck={ranking[0][0]} utilization={ranking[0][1]:.3f}")
    return 0


def cmd_sweep(args) -> int:
    spec = load_pipeline(args.pipeline)
    counts = args.streams or list(range(1, 13))
    sweep = SweepSpec(spec, _config(args), tuple(counts), args.replications)
    study = run_sweep(sweep, jobs=args.jobs)
    outputs = {}
    if args.out:
        outputs[Path(args.out)] = fps_csv(study.rows())
    if args.chart:
        ci = {s: p.ci95_halfwidth for s, p in study.summary.items()}
        outputs[Path(args.chart)] = _chart([_curve_series("simulated", study.curve(), ci)],
                                           "FPS per video stream vs number of streams")
    err = None
    if args.measured:
        err = curve_error(study.curve(), read_measured_csv(Path(args.measured).read_text(encoding="utf-8")))
    write_outputs(outputs)
    print("streams,mean_fps_per_stream,ci95,aggregate_fps")
    for s, p in study.summary.items():
        print(f"{s},{p.mean_fps_per_stream:.3f},{p.ci95_halfwidth:.3f},{p.aggregate_fps:.3f}")
    if err is not None:
        print(f"prediction_error_mean={err.mean:.6f} prediction_error_max={err.max:.6f}")
    return 0


def cmd_ab(args) -> int:
    spec = load_pipeline(args.pipeline)
    mod = load_modification(args.modification)
    counts = tuple(args.streams or range(1, 13))
    report = run_ab_study(spec, mod, SweepSpec(spec, _config(args), counts, args.replications),
                          jobs=args.jobs)
    outputs = {}
    if args.out:
        outputs[Path(args.out)] = report.to_csv()
    if args.chart:
        base = {p.x: p.baseline_fps for p in report.points}
        var = {p.x: p.variant_fps for p in report.points}
        outputs[Path(args.chart)] = _chart([_curve_series("baseline", base),
                                            _curve_series(mod.kind, var)],
                                           "Impact of pipeline modification")
    write_outputs(outputs)
    print("streams,baseline_fps,variant_fps,slowdown")
    for p in report.points:
        print(f"{p.x},{p.baseline_fps:.3f},{p.variant_fps:.3f},{p.ratio:.4f}")
    return 0


def cmd_optimize(args) -> int:
    if not args.ideal and not args.overhead:
        raise HetsimError("optimize needs --ideal and/or --overhead PATH")
    spec = load_pipeline(args.pipeline)
    overhead = load_distribution(args.overhead)[1] if args.overhead else None
    res = run_optimization_study(spec, args.node, ideal=args.ideal, measured_overhead=overhead,
                                 streams=args.streams or 6, cfg=_config(args),
                                 replications=args.replications)
    if args.out:
        write_outputs({Path(args.out): json.dumps(res, indent=2, sort_keys=True) + "\n"})
    for key in ("ideal_speedup", "real_speedup"):
        if key in res:
            print(f"{key}={res[key]:.4f}")
    return 0


def cmd_compare(args) -> int:
    base = _read_sweep_csv(args.baseline)
    outputs = {}
    if args.variant:
        var = _read_sweep_csv(args.variant)
        report = slowdown_curve(base, var, "baseline", "variant")
        if args.out:
            outputs[Path(args.out)] = report.to_csv()
        if args.chart:
            outputs[Path(args.chart)] = _chart([_curve_series("baseline", base),
                                                _curve_series("variant", var)], "Baseline vs variant")
        write_outputs(outputs)
        for p in report.points:
            print(f"streams={p.x} slowdown={p.ratio:.4f}")
        return 0
    measured = read_measured_csv(Path(args.measured).read_text(encoding="utf-8"))
    err = curve_error(base, measured)
    if args.out:
        rows = "".join(f"{x},{base[x]:.6f},{measured[x]:.6f},{e:.6f}\n" for x, e in err.per_point.items())
        outputs[Path(args.out)] = "streams,predicted_fps,measured_fps,error\n" + rows
    if args.chart:
        outputs[Path(args.chart)] = _chart([_curve_series("simulated", base),
                                            _curve_series("measured", measured)], "Simulated vs measured")
    write_outputs(outputs)
    print(f"prediction_error_mean={err.mean:.6f} prediction_error_max={err.max:.6f}")
    return 0


def cmd_report(args) -> int:
    curves = {Path(p).stem: _read_sweep_csv(p) for p in args.input}
    outputs = {}
    if args.chart:
        outputs[Path(args.chart)] = _chart([_curve_series(k, v) for k, v in curves.items()],
                                           "FPS per video stream vs number of streams")
    lines = ["| input | streams | FPS per stream | aggregate FPS |", "|---|---|---|---|"]
    for name, curve in curves.items():
        for s, f in curve.items():
            lines.append(f"| {name} | {s} | {f:.2f} | {f * s:.2f} |")
    table = "\n".join(lines) + "\n"
    if args.out:
        outputs[Path(args.out)] = table
    write_outputs(outputs)
    print(table, end="")
    return 0


COMMANDS = {
    "validate": cmd_validate, "ingest": cmd_ingest, "run": cmd_run, "sweep": cmd_sweep,
    "ab": cmd_ab, "optimize": cmd_optimize, "compare": cmd_compare, "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (HetsimError, OSError, json.JSONDecodeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {msg}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
