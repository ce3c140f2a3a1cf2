"""Discrete-event kernel for flow-graph pipelines on a CPU worker pool.

Every node instance is a sequential server: it takes one message from its
input queue, waits for a CPU worker, runs for a sampled service time and
broadcasts the message to its successors before returning the worker.
Exclusive nodes (the GPU node) differ in that they hand their worker back
while they hold the exclusive resource, and need a worker again to
broadcast the result.

Time is integer microseconds. Events are ordered by ``(time, sequence)``,
so a run is fully determined by the graph, the config and the seed.
"""

from __future__ import annotations

import heapq
import io
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

from hetsim.distributions import RngState, ServiceDistribution
from hetsim.errors import DeadlockError, SimulationError
from hetsim.graph import RuntimeGraph

MSG_DEQUEUED = "msg_dequeued"
CORE_ACQUIRED = "core_acquired"
CORE_RELEASED = "core_released"
RESOURCE_ACQUIRED = "resource_acquired"
RESOURCE_RELEASED = "resource_released"
SERVICE_STARTED = "service_started"
SERVICE_FINISHED = "service_finished"
MSG_EMITTED = "msg_emitted"
FRAME_COMPLETED = "frame_completed"

CPU_POOL = "cpu"


@dataclass(frozen=True)
class SimConfig:
    cpu_workers: int = 12
    frames_per_stream: int = 1000
    seed: int = 0
    warmup_fraction: float = 0.10
    max_sim_time: int | None = None
    record_events: bool = True

    def __post_init__(self):
        if not isinstance(self.cpu_workers, int) or self.cpu_workers < 1:
            raise SimulationError(f"cpu_workers must be >= 1, got {self.cpu_workers!r}")
        if not isinstance(self.frames_per_stream, int) or self.frames_per_stream < 1:
            raise SimulationError(f"frames_per_stream must be >= 1, got {self.frames_per_stream!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SimulationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise SimulationError(f"warmup_fraction must be in [0, 1), got {self.warmup_fraction!r}")
        if self.max_sim_time is not None and self.max_sim_time < 0:
            raise SimulationError("max_sim_time must be >= 0")


class EventRecord(NamedTuple):
    time: int
    node: str
    kind: str
    stream: int
    frame: int


@dataclass(frozen=True, slots=True)
class Message:
    stream_id: int
    frame_index: int
    created_at: int
    provenance: tuple[tuple[str, int], ...] = ()


@dataclass
class SimResult:
    events: list[EventRecord]
    end_time: int
    per_stream_completion: dict[int, list[int]]
    resource_busy_time: dict[str, int]
    node_busy_time: dict[str, int]
    max_queue_depth: dict[str, int]
    capacities: dict[str, int]
    frames_per_stream: int
    truncated: bool = False

    @property
    def streams(self) -> int:
        return len(self.per_stream_completion)

    def events_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_us,node,kind,stream,frame\n")
        for e in self.events:
            buf.write(f"{e.time},{e.node},{e.kind},{e.stream},{e.frame}\n")
        return buf.getvalue()

    def summary(self) -> dict[str, Any]:
        return {
            "end_time_us": self.end_time,
            "truncated": self.truncated,
            "frames_per_stream": self.frames_per_stream,
            "completions": {str(s): len(c) for s, c in self.per_stream_completion.items()},
            "busy_time_us": dict(self.resource_busy_time),
            "node_busy_time_us": dict(self.node_busy_time),
            "capacities": dict(self.capacities),
            "max_queue_depth": dict(self.max_queue_depth),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


class _Pool:
    """Counting semaphore with FIFO hand-over and busy-time accounting."""

    __slots__ = ("name", "capacity", "free", "waiters", "held", "busy", "last", "sim")

    def __init__(self, sim: "_Simulation", name: str, capacity: int):
        self.sim = sim
        self.name = name
        self.capacity = capacity
        self.free = capacity
        self.waiters: deque = deque()
        self.held = 0
        self.busy = 0
        self.last = 0

    def _account(self, delta: int) -> None:
        now = self.sim.now
        self.busy += self.held * (now - self.last)
        self.last = now
        self.held += delta

    def request(self, fn: Callable, arg: Any) -> None:
        if self.free and not self.waiters:
            self.free -= 1
            self._account(1)
            self.sim.schedule(self.sim.now, fn, arg)
        else:
            self.waiters.append((fn, arg))

    def release(self) -> None:
        if self.waiters:
            # unit passes straight to the oldest waiter
            fn, arg = self.waiters.popleft()
            self.sim.schedule(self.sim.now, fn, arg)
        else:
            self.free += 1
            self._account(-1)

    def close(self, end: int) -> int:
        return self.busy + self.held * (end - self.last)


_SOURCE, _BASIC, _EXCLUSIVE, _SINK = range(4)
_KIND_CODES = {"source": _SOURCE, "basic": _BASIC, "exclusive": _EXCLUSIVE, "sink": _SINK}


class _Proc:
    __slots__ = ("name", "base", "stream", "kind", "dist", "rng", "resource", "succs",
                 "n_preds", "join_all", "inbox", "pending", "busy", "msg", "next_frame",
                 "max_depth")

    def __init__(self, name, base, stream, kind, dist, rng, resource, n_preds, join_all):
        self.name = name
        self.base = base
        self.stream = stream
        self.kind = kind
        self.dist = dist
        self.rng = rng
        self.resource = resource
        self.succs: list = []
        self.n_preds = n_preds
        self.join_all = join_all and n_preds > 1
        self.inbox: deque = deque()
        self.pending: dict[int, dict[str, Message]] = {}
        self.busy = False
        self.msg: Message | None = None
        self.next_frame = 0
        self.max_depth = 0


class _Simulation:
    def __init__(self, graph: RuntimeGraph, cfg: SimConfig):
        self.cfg = cfg
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self.log: list[EventRecord] | None = [] if cfg.record_events else None
        self.frames = cfg.frames_per_stream
        spec = graph.spec
        table = spec.distributions

        self.pool = _Pool(self, CPU_POOL, cfg.cpu_workers)
        self.resources = {name: _Pool(self, name, cap) for name, cap in graph.resources.items()}
        self.node_busy: dict[str, int] = {n.name: 0 for n in spec.nodes}

        self.procs: dict[str, _Proc] = {}
        for inst in graph.instances:
            node = inst.node
            p = _Proc(inst.name, node.name, inst.stream, _KIND_CODES[node.kind],
                      table[node.distribution_ref], RngState.for_key(cfg.seed, inst.name),
                      self.resources.get(node.resource_ref) if node.resource_ref else None,
                      len(inst.preds), node.join_policy == "all_of")
            self.procs[inst.name] = p
        for inst in graph.instances:
            p = self.procs[inst.name]
            for dst, lat in inst.succs:
                lat_dist = table[lat] if lat is not None else None
                lat_rng = RngState.for_key(cfg.seed, f"{inst.name}->{dst}") if lat is not None else None
                p.succs.append((self.procs[dst], lat_dist, lat_rng))

        sinks = [n.name for n in spec.nodes if n.kind == "sink"]
        self.n_sinks = len(sinks)
        self.completion: dict[int, list[int]] = {s: [] for s in range(graph.streams)}
        self._sink_hits: dict[tuple[int, int], set[str]] = {}
        self.remaining = graph.streams * self.frames

    # -- kernel --------------------------------------------------------------

    def schedule(self, time: int, fn: Callable, arg: Any) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, fn, arg))

    def record(self, p: _Proc, kind: str) -> None:
        if self.log is not None:
            self.log.append(EventRecord(self.now, p.name, kind, p.stream, p.msg.frame_index))

    def run(self) -> SimResult:
        for p in self.procs.values():
            if p.kind == _SOURCE:
                self.try_start(p)
        heap = self._heap
        limit = self.cfg.max_sim_time
        truncated = False
        pop = heapq.heappop
        while heap:
            if limit is not None and heap[0][0] > limit:
                truncated = True
                break
            t, _, fn, arg = pop(heap)
            self.now = t
            fn(arg)
        if not truncated and self.remaining > 0:
            blocked = self._blocked()
            raise DeadlockError("deadlock: no schedulable event with frames outstanding; blocked: "
                                + ", ".join(blocked), blocked)
        end = self.now
        busy = {CPU_POOL: self.pool.close(end)}
        for name, r in self.resources.items():
            busy[name] = r.close(end)
        return SimResult(
            events=self.log if self.log is not None else [],
            end_time=end,
            per_stream_completion=self.completion,
            resource_busy_time=busy,
            node_busy_time=dict(self.node_busy),
            max_queue_depth={p.name: p.max_depth for p in self.procs.values() if p.kind != _SOURCE},
            capacities={CPU_POOL: self.pool.capacity,
                        **{n: r.capacity for n, r in self.resources.items()}},
            frames_per_stream=self.frames,
            truncated=truncated,
        )

    def _blocked(self) -> list[str]:
        out = []
        for p in self.procs.values():
            if p.pending:
                out.append(f"{p.name} (join waiting on {len(p.pending)} frame(s))")
            elif p.inbox or p.busy:
                out.append(f"{p.name} (holding {len(p.inbox)} queued message(s))")
        return out or ["<nothing queued; frames never reached a sink>"]

    # -- node behaviour ------------------------------------------------------

    def try_start(self, p: _Proc) -> None:
        if p.busy:
            return
        if p.kind == _SOURCE:
            if p.next_frame >= self.frames:
                return
            p.msg = Message(p.stream, p.next_frame, self.now)
            p.next_frame += 1
        else:
            if not p.inbox:
                return
            p.msg = p.inbox.popleft()
            self.record(p, MSG_DEQUEUED)
        p.busy = True
        self.pool.request(self._on_core, p)

    def _service(self, p: _Proc, done: Callable) -> None:
        t = int(p.dist.ppf(p.rng.uniform()) + 0.5)
        self.node_busy[p.base] += t
        self.record(p, SERVICE_STARTED)
        self.schedule(self.now + t, done, p)

    def _on_core(self, p: _Proc) -> None:
        self.record(p, CORE_ACQUIRED)
        if p.kind == _EXCLUSIVE:
            p.resource.request(self._on_resource, p)
        else:
            self._service(p, self._on_done)

    def _on_done(self, p: _Proc) -> None:
        self.record(p, SERVICE_FINISHED)
        if p.kind == _SINK:
            self._complete(p)
        else:
            self._emit(p)
        self._finish(p)

    def _finish(self, p: _Proc) -> None:
        self.record(p, CORE_RELEASED)
        self.pool.release()
        p.busy = False
        self.try_start(p)

    def _on_resource(self, p: _Proc) -> None:
        self.record(p, RESOURCE_ACQUIRED)
        self.record(p, CORE_RELEASED)
        self.pool.release()
        self._service(p, self._on_resource_done)

    def _on_resource_done(self, p: _Proc) -> None:
        self.record(p, SERVICE_FINISHED)
        self.record(p, RESOURCE_RELEASED)
        p.resource.release()
        self.pool.request(self._on_emit_core, p)

    def _on_emit_core(self, p: _Proc) -> None:
        self.record(p, CORE_ACQUIRED)
        self._emit(p)
        self._finish(p)

    def _emit(self, p: _Proc) -> None:
        self.record(p, MSG_EMITTED)
        m = p.msg
        out = Message(m.stream_id, m.frame_index, m.created_at, m.provenance + ((p.name, self.now),))
        for q, lat_dist, lat_rng in p.succs:
            if lat_dist is None:
                self._deliver((q, out, p.name))
            else:
                delay = int(lat_dist.ppf(lat_rng.uniform()) + 0.5)
                self.schedule(self.now + delay, self._deliver, (q, out, p.name))

    def _deliver(self, arg: tuple[_Proc, Message, str]) -> None:
        q, m, src = arg
        if q.join_all:
            slot = q.pending.get(m.frame_index)
            if slot is None:
                slot = q.pending[m.frame_index] = {}
            slot[src] = m
            if len(slot) < q.n_preds:
                return
            del q.pending[m.frame_index]
            parts = list(slot.values())
            prov = tuple(sorted({x for part in parts for x in part.provenance}, key=lambda x: (x[1], x[0])))
            m = Message(m.stream_id, m.frame_index, min(x.created_at for x in parts), prov)
        q.inbox.append(m)
        if len(q.inbox) > q.max_depth:
            q.max_depth = len(q.inbox)
        self.try_start(q)

    def _complete(self, p: _Proc) -> None:
        self.record(p, MSG_EMITTED)
        key = (p.stream, p.msg.frame_index)
        hits = self._sink_hits.get(key)
        if hits is None:
            hits = self._sink_hits[key] = set()
        if p.base in hits:
            return  # duplicate delivery (any_of upstream)
        hits.add(p.base)
        if len(hits) == self.n_sinks:
            self.completion[p.stream].append(self.now)
            self.record(p, FRAME_COMPLETED)
            self.remaining -= 1


def simulate(graph: RuntimeGraph, cfg: SimConfig) -> SimResult:
    """Run ``graph`` until every stream has completed all its frames."""
    return _Simulation(graph, cfg).run()


# -- bottleneck analysis -------------------------------------------------------


def _clipped(start: int, end: int, lo: float, hi: float) -> float:
    return max(0.0, min(end, hi) - max(start, lo))


def detect_bottleneck(result: SimResult, graph: RuntimeGraph,
                      warmup_fraction: float = 0.0) -> list[tuple[str, float]]:
    """Rank the CPU pool, resources and node classes by utilization.

    Utilization is busy time over ``[warmup_fraction * end_time, end_time]``
    divided by the entity's capacity: worker count for the pool, resource
    capacity for resources and shared nodes, stream count for per-stream
    node classes. Entities are named ``cpu``, ``resource:<name>`` and
    ``node:<name>``.
    """
    if not result.events:
        raise SimulationError("detect_bottleneck needs an event log (run with record_events=True)")
    end = result.end_time
    lo = warmup_fraction * end
    window = end - lo
    if window <= 0:
        raise SimulationError("empty measurement window")

    resource_of = {i.name: i.node.resource_ref for i in graph.instances}
    base_of = {i.name: i.node.name for i in graph.instances}
    busy: dict[str, float] = {CPU_POOL: 0.0}
    busy.update({f"resource:{r}": 0.0 for r in graph.resources})
    busy.update({f"node:{n.name}": 0.0 for n in graph.spec.nodes})
    core_since: dict[str, list[int]] = {}
    res_since: dict[str, int] = {}
    svc_since: dict[str, int] = {}

    for e in result.events:
        k = e.kind
        if k == CORE_ACQUIRED:
            core_since.setdefault(e.node, []).append(e.time)
        elif k == CORE_RELEASED:
            busy[CPU_POOL] += _clipped(core_since[e.node].pop(), e.time, lo, end)
        elif k == RESOURCE_ACQUIRED:
            res_since[e.node] = e.time
        elif k == RESOURCE_RELEASED:
            busy[f"resource:{resource_of[e.node]}"] += _clipped(res_since.pop(e.node), e.time, lo, end)
        elif k == SERVICE_STARTED:
            svc_since[e.node] = e.time
        elif k == SERVICE_FINISHED:
            busy[f"node:{base_of[e.node]}"] += _clipped(svc_since.pop(e.node), e.time, lo, end)

    capacity = {CPU_POOL: result.capacities[CPU_POOL]}
    capacity.update({f"resource:{r}": c for r, c in graph.resources.items()})
    for n in graph.spec.nodes:
        capacity[f"node:{n.name}"] = graph.resources[n.resource_ref] if n.kind == "exclusive" \
            else graph.streams
    ranked = [(name, busy[name] / (capacity[name] * window)) for name in busy]
    order = {"resource": 0, "cpu": 1, "node": 2}
    ranked.sort(key=lambda x: (-x[1], order[x[0].split(":")[0]], x[0]))
    return ranked
