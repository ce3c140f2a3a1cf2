"""Profiling trace ingestion.

Trace files are CSV with the header ``node,stream,start_us,end_us``; one
row per executed span, integer microsecond timestamps. Spans may overlap
and appear in any order. Samples are pooled per node name across streams.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from hetsim import distributions as dists
from hetsim.distributions import Empirical, from_samples
from hetsim.errors import DistributionError, TraceParseError

HEADER = ("node", "stream", "start_us", "end_us")


@dataclass(frozen=True)
class TraceRecord:
    node: str
    stream_id: int
    start_us: int
    end_us: int

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us


def _int_field(value: str, name: str, line: int) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise TraceParseError(f"{name} is not an integer: {value!r}", line) from None


def parse_trace(source: TextIO | str | bytes) -> list[TraceRecord]:
    """Parse trace CSV text (or an open text stream) into records, in file order."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source, newline="")
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise TraceParseError("missing header " + ",".join(HEADER), 1)
    if header and header[0].startswith("\ufeff"):
        header[0] = header[0][1:]
    if tuple(h.strip() for h in header) != HEADER:
        raise TraceParseError(f"missing header {','.join(HEADER)!r}, got {','.join(header)!r}", 1)

    records = []
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise TraceParseError(f"expected 4 fields, got {len(row)}", line)
        node = row[0].strip()
        if not node:
            raise TraceParseError("empty node name", line)
        stream = _int_field(row[1], "stream", line)
        start = _int_field(row[2], "start_us", line)
        end = _int_field(row[3], "end_us", line)
        if end < start:
            raise TraceParseError(f"end_us {end} < start_us {start}", line)
        records.append(TraceRecord(node, stream, start, end))
    return records


def load_trace(path: str | Path) -> list[TraceRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_trace(fh)


def serialize_trace(records: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in records:
        w.writerow((r.node, r.stream_id, r.start_us, r.end_us))
    return buf.getvalue()


@dataclass(frozen=True)
class DistributionBundle:
    per_node: dict[str, Empirical]
    sample_counts: dict[str, int]

    def __post_init__(self):
        if set(self.per_node) != set(self.sample_counts):
            raise DistributionError("bundle keys and sample counts disagree")
        for name, d in self.per_node.items():
            if len(d.samples) != self.sample_counts[name]:
                raise DistributionError(f"sample count mismatch for {name!r}")


def build_distributions(records: Iterable[TraceRecord]) -> DistributionBundle:
    grouped: dict[str, list[float]] = defaultdict(list)
    for r in records:
        grouped[r.node].append(float(r.duration_us))
    if not grouped:
        raise TraceParseError("no trace records to build distributions from")
    per_node = {name: from_samples(samples) for name, samples in sorted(grouped.items())}
    return DistributionBundle(per_node, {n: len(d.samples) for n, d in per_node.items()})


def bundle_to_json(bundle: DistributionBundle) -> dict:
    return {name: d.to_json() for name, d in bundle.per_node.items()}


def dump_bundle(bundle: DistributionBundle) -> str:
    return json.dumps(bundle_to_json(bundle), indent=1) + "\n"


def bundle_files(bundle: DistributionBundle) -> dict[str, str]:
    """One distribution document per node, keyed by file name."""
    return {f"{name}.json": dists.dump_distribution(d, name) for name, d in bundle.per_node.items()}


def load_bundle(path: str | Path) -> DistributionBundle:
    """Load a combined JSON map, or a directory of per-node distribution files."""
    path = Path(path)
    per_node: dict[str, Empirical] = {}
    if path.is_dir():
        for f in sorted(path.glob("*.json")):
            name, d = dists.load_distribution(f)
            per_node[name or f.stem] = d
    else:
        obj = json.loads(path.read_text(encoding="utf-8"))
        per_node = {name: dists.from_json(d) for name, d in obj.items()}
    for name, d in per_node.items():
        if not isinstance(d, Empirical):
            raise DistributionError(f"bundle entry {name!r} is not empirical")
    return DistributionBundle(per_node, {n: len(d.samples) for n, d in per_node.items()})
