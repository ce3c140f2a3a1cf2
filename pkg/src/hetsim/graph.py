"""Flow-graph pipeline description, validation, stream replication and edits.

A pipeline is described once per video stream. Nodes listed in
``per_stream_nodes`` are copied for every stream; exclusive nodes (the GPU
node) are shared across streams and serialize on a named resource.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from hetsim import distributions as dists
from hetsim.distributions import Constant, ServiceDistribution
from hetsim.errors import DistributionError, GraphError

NODE_KINDS = ("source", "basic", "exclusive", "sink")
JOIN_POLICIES = ("all_of", "any_of")


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str
    distribution_ref: str
    resource_ref: str | None = None
    join_policy: str = "all_of"


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    latency_ref: str | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class ExclusiveResource:
    name: str
    capacity: int = 1


@dataclass(frozen=True)
class FlowGraphSpec:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]
    resources: tuple[ExclusiveResource, ...]
    per_stream_nodes: tuple[str, ...]
    distributions: Mapping[str, ServiceDistribution] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "resources", tuple(self.resources))
        object.__setattr__(self, "per_stream_nodes", tuple(self.per_stream_nodes))
        object.__setattr__(self, "distributions", dict(self.distributions))

    @property
    def shared_nodes(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes if n.kind == "exclusive")

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise GraphError(f"unknown node {name!r}")

    def predecessors(self, name: str) -> list[str]:
        return [e.src for e in self.edges if e.dst == name]

    def successors(self, name: str) -> list[str]:
        return [e.dst for e in self.edges if e.src == name]


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


def _find_cycle(names: list[str], succ: dict[str, list[str]]) -> list[str] | None:
    """Return one cycle as a closed node path, or None for a DAG."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(names, WHITE)
    for root in names:
        if color[root] != WHITE:
            continue
        path = [root]
        stack = [iter(succ.get(root, ()))]
        color[root] = GREY
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                color[path.pop()] = BLACK
                stack.pop()
                continue
            state = color.get(nxt)
            if state == GREY:
                return path[path.index(nxt):] + [nxt]
            if state == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append(iter(succ.get(nxt, ())))
    return None


def validate(spec: FlowGraphSpec) -> ValidationResult:
    """Check every structural rule; violations are returned, never raised."""
    out: list[Violation] = []

    def bad(element: str, rule: str, message: str) -> None:
        out.append(Violation(str(element), rule, message))

    nodes = [n for n in spec.nodes if isinstance(n, NodeSpec)]
    if len(nodes) != len(spec.nodes):
        bad("nodes", "type", "nodes must be NodeSpec values")
    table = spec.distributions if isinstance(spec.distributions, Mapping) else {}

    for key, d in table.items():
        if not isinstance(d, ServiceDistribution):
            bad(key, "distribution", f"distribution {key!r} is not a ServiceDistribution")

    resources: dict[str, int] = {}
    for r in spec.resources:
        if not isinstance(r, ExclusiveResource):
            bad("resources", "type", "resources must be ExclusiveResource values")
            continue
        if r.name in resources:
            bad(r.name, "duplicate resource", f"duplicate resource {r.name!r}")
        if not isinstance(r.capacity, int) or isinstance(r.capacity, bool) or r.capacity < 1:
            bad(r.name, "capacity", f"resource {r.name!r}: capacity must be an integer >= 1")
        resources[r.name] = r.capacity

    names: list[str] = []
    seen: set[str] = set()
    for n in nodes:
        if not isinstance(n.name, str) or not n.name or "#" in n.name:
            bad(repr(n.name), "name", f"node name {n.name!r} must be a non-empty string without '#'")
        if n.name in seen:
            bad(n.name, "duplicate node", f"duplicate node name {n.name!r}")
            continue
        seen.add(n.name)
        names.append(n.name)
        if n.kind not in NODE_KINDS:
            bad(n.name, "kind", f"node {n.name!r}: unknown kind {n.kind!r}")
        if n.join_policy not in JOIN_POLICIES:
            bad(n.name, "join", f"node {n.name!r}: unknown join policy {n.join_policy!r}")
        if n.kind == "exclusive":
            if n.resource_ref is None or n.resource_ref not in resources:
                bad(n.name, "unresolved resource",
                    f"unresolved resource: node {n.name!r} references {n.resource_ref!r}")
        elif n.resource_ref is not None:
            bad(n.name, "resource on non-exclusive node",
                f"node {n.name!r}: only exclusive nodes may reference a resource")
        if n.distribution_ref not in table:
            bad(n.name, "unresolved distribution",
                f"unresolved distribution: node {n.name!r} references {n.distribution_ref!r}")

    succ: dict[str, list[str]] = {n: [] for n in names}
    pred: dict[str, list[str]] = {n: [] for n in names}
    edge_keys: set[tuple[str, str]] = set()
    for e in spec.edges:
        if not isinstance(e, EdgeSpec):
            bad("edges", "type", "edges must be EdgeSpec values")
            continue
        label = f"{e.src}->{e.dst}"
        missing = [x for x in (e.src, e.dst) if x not in seen]
        if missing:
            bad(label, "unknown endpoint", f"edge {label}: unknown endpoint(s) {missing}")
            continue
        if e.key in edge_keys:
            bad(label, "duplicate edge", f"duplicate edge {label}")
            continue
        edge_keys.add(e.key)
        succ[e.src].append(e.dst)
        pred[e.dst].append(e.src)
        if e.latency_ref is not None and e.latency_ref not in table:
            bad(label, "unresolved distribution",
                f"unresolved distribution: edge {label} latency references {e.latency_ref!r}")

    kinds = {n.name: n.kind for n in nodes}
    for name in names:
        kind = kinds[name]
        if kind == "source" and pred[name]:
            bad(name, "source has predecessors", f"source {name!r} has predecessors {pred[name]}")
        if kind == "sink" and succ[name]:
            bad(name, "sink has successors", f"sink {name!r} has successors {succ[name]}")
        if kind in ("basic", "exclusive", "sink") and not pred[name]:
            bad(name, "no input", f"node {name!r} has no predecessors and is not a source")
        if kind in ("source", "basic", "exclusive") and not succ[name]:
            bad(name, "no output", f"node {name!r} has no successors and is not a sink")
    if names and "source" not in kinds.values():
        bad("graph", "no source", "graph has no source node")
    if names and "sink" not in kinds.values():
        bad("graph", "no sink", "graph has no sink node")
    if not names:
        bad("graph", "empty", "graph has no nodes")

    cycle = _find_cycle(names, succ)
    if cycle:
        bad("->".join(cycle), "cycle", "cycle: " + "→".join(cycle))

    per_stream = list(spec.per_stream_nodes)
    if len(set(per_stream)) != len(per_stream):
        bad("per_stream_nodes", "duplicate", "per_stream_nodes lists a node twice")
    for name in per_stream:
        if name not in seen:
            bad(name, "unknown per-stream node", f"per_stream_nodes names unknown node {name!r}")
        elif kinds[name] == "exclusive":
            bad(name, "category", f"exclusive node {name!r} is shared and cannot be per-stream")
    for name in names:
        if kinds[name] != "exclusive" and name not in per_stream:
            bad(name, "category", f"node {name!r} is neither per-stream nor shared")

    return ValidationResult(tuple(out))


def check(spec: FlowGraphSpec) -> FlowGraphSpec:
    result = validate(spec)
    if not result.ok:
        raise GraphError("invalid pipeline: " + "; ".join(result.messages()), list(result.violations))
    return spec


# -- stream replication --------------------------------------------------------


def instance_name(node: str, stream: int) -> str:
    return f"{node}#{stream}"


@dataclass(frozen=True)
class NodeInstance:
    name: str
    node: NodeSpec
    stream: int
    shared: bool
    preds: tuple[str, ...]
    succs: tuple[tuple[str, str | None], ...]  # (instance, latency_ref)


@dataclass(frozen=True)
class RuntimeGraph:
    """A pipeline expanded for a fixed number of streams.

    Shared (exclusive) nodes get one lane per stream; lanes of the same node
    contend for a single shared resource instance.
    """

    spec: FlowGraphSpec
    streams: int
    instances: tuple[NodeInstance, ...]
    resources: Mapping[str, int]

    @property
    def node_instances(self) -> tuple[NodeInstance, ...]:
        return tuple(i for i in self.instances if not i.shared)

    @property
    def lanes(self) -> tuple[NodeInstance, ...]:
        return tuple(i for i in self.instances if i.shared)

    def instance(self, name: str) -> NodeInstance:
        for i in self.instances:
            if i.name == name:
                return i
        raise KeyError(name)


def instantiate(spec: FlowGraphSpec, streams: int) -> RuntimeGraph:
    if not isinstance(streams, int) or streams < 1:
        raise GraphError(f"streams must be a positive integer, got {streams!r}")
    check(spec)
    per_stream = set(spec.per_stream_nodes)
    out = []
    for s in range(streams):
        for n in spec.nodes:
            preds = tuple(instance_name(e.src, s) for e in spec.edges if e.dst == n.name)
            succs = tuple((instance_name(e.dst, s), e.latency_ref) for e in spec.edges if e.src == n.name)
            out.append(NodeInstance(instance_name(n.name, s), n, s, n.name not in per_stream, preds, succs))
    return RuntimeGraph(spec, streams, tuple(out), {r.name: r.capacity for r in spec.resources})


# -- modifications -------------------------------------------------------------

MOD_KINDS = ("add_node", "remove_node", "set_distribution", "zero_node", "set_edge_latency")


@dataclass(frozen=True)
class Modification:
    kind: str
    node: str | None = None
    new_node: NodeSpec | None = None
    edges: tuple[EdgeSpec, ...] = ()
    distribution: ServiceDistribution | None = None
    edge: tuple[str, str] | None = None

    @classmethod
    def add_node(cls, node: NodeSpec, edges: Iterable[EdgeSpec | tuple[str, str]],
                 distribution: ServiceDistribution | None = None) -> "Modification":
        es = tuple(e if isinstance(e, EdgeSpec) else EdgeSpec(*e) for e in edges)
        return cls("add_node", node=node.name, new_node=node, edges=es, distribution=distribution)

    @classmethod
    def remove_node(cls, name: str) -> "Modification":
        return cls("remove_node", node=name)

    @classmethod
    def set_distribution(cls, name: str, distribution: ServiceDistribution) -> "Modification":
        return cls("set_distribution", node=name, distribution=distribution)

    @classmethod
    def zero_node(cls, name: str) -> "Modification":
        return cls("zero_node", node=name)

    @classmethod
    def set_edge_latency(cls, src: str, dst: str,
                         distribution: ServiceDistribution | None) -> "Modification":
        return cls("set_edge_latency", edge=(src, dst), distribution=distribution)


def _fresh_key(table: Mapping[str, Any], base: str) -> str:
    key, i = base, 1
    while key in table:
        i += 1
        key = f"{base}.{i}"
    return key


def _referenced(nodes: Iterable[NodeSpec], edges: Iterable[EdgeSpec]) -> set[str]:
    refs = {n.distribution_ref for n in nodes}
    refs.update(e.latency_ref for e in edges if e.latency_ref is not None)
    return refs


def apply_modification(spec: FlowGraphSpec, mod: Modification) -> FlowGraphSpec:
    """Return a new validated spec with ``mod`` applied; ``spec`` is untouched."""
    names = {n.name for n in spec.nodes}
    table = dict(spec.distributions)
    kind = mod.kind

    if kind == "add_node":
        node = mod.new_node
        if node is None:
            raise GraphError("add_node needs a node")
        if node.name in names:
            raise GraphError(f"duplicate node name {node.name!r}")
        if mod.distribution is not None:
            existing = table.get(node.distribution_ref)
            if existing is not None and existing != mod.distribution:
                raise GraphError(f"distribution name {node.distribution_ref!r} already in use")
            table[node.distribution_ref] = mod.distribution
        for e in mod.edges:
            for end in (e.src, e.dst):
                if end != node.name and end not in names:
                    raise GraphError(f"unknown node {end!r} in edge {e.src}->{e.dst}")
        per_stream = spec.per_stream_nodes
        if node.kind != "exclusive":
            per_stream = per_stream + (node.name,)
        new = replace(spec, nodes=spec.nodes + (node,), edges=spec.edges + tuple(mod.edges),
                      per_stream_nodes=per_stream, distributions=table)

    elif kind == "remove_node":
        target = spec.node(mod.node)
        nodes = tuple(n for n in spec.nodes if n.name != target.name)
        edges = tuple(e for e in spec.edges if target.name not in (e.src, e.dst))
        incident = [e for e in spec.edges if target.name in (e.src, e.dst)]
        # entries only the removed elements used go with them
        for key in _referenced([target], incident) - _referenced(nodes, edges):
            table.pop(key, None)
        new = replace(spec, nodes=nodes, edges=edges, distributions=table,
                      per_stream_nodes=tuple(n for n in spec.per_stream_nodes if n != target.name))

    elif kind in ("set_distribution", "zero_node"):
        target = spec.node(mod.node)
        dist = Constant(0.0) if kind == "zero_node" else mod.distribution
        if not isinstance(dist, ServiceDistribution):
            raise GraphError("set_distribution needs a distribution")
        ref = target.distribution_ref
        others = _referenced([n for n in spec.nodes if n.name != target.name], spec.edges)
        if ref in others:
            # the table entry is shared; give this node its own entry
            ref = _fresh_key(table, f"{target.name}.dist")
        table[ref] = dist
        nodes = tuple(replace(n, distribution_ref=ref) if n.name == target.name else n
                      for n in spec.nodes)
        new = replace(spec, nodes=nodes, distributions=table)

    elif kind == "set_edge_latency":
        if mod.edge is None:
            raise GraphError("set_edge_latency needs an edge")
        matches = [e for e in spec.edges if e.key == tuple(mod.edge)]
        if not matches:
            raise GraphError(f"unknown edge {mod.edge[0]}->{mod.edge[1]}")
        old = matches[0]
        if mod.distribution is None:
            ref = None
        else:
            ref = old.latency_ref
            users = _referenced(spec.nodes, [e for e in spec.edges if e is not old])
            if ref is None or ref in users:
                ref = _fresh_key(table, f"{old.src}->{old.dst}.latency")
            table[ref] = mod.distribution
        edges = tuple(replace(e, latency_ref=ref) if e is old else e for e in spec.edges)
        if old.latency_ref is not None and old.latency_ref != ref and \
                old.latency_ref not in _referenced(spec.nodes, edges):
            table.pop(old.latency_ref, None)
        new = replace(spec, edges=edges, distributions=table)

    else:
        raise GraphError(f"unknown modification kind {kind!r}")

    return check(new)


# -- JSON ----------------------------------------------------------------------

_TOP_KEYS = {"nodes", "edges", "resources", "distributions", "per_stream_nodes"}
_NODE_KEYS = {"name", "kind", "dist", "resource", "join"}
_EDGE_KEYS = {"from", "to", "latency"}
_RES_KEYS = {"name", "capacity"}


def _reject_unknown(obj: Any, allowed: set[str], where: str, required: Iterable[str] = ()) -> None:
    if not isinstance(obj, dict):
        raise GraphError(f"{where}: expected a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise GraphError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise GraphError(f"{where}: missing keys {missing}")


def _node_from_json(obj: Any, where: str) -> NodeSpec:
    _reject_unknown(obj, _NODE_KEYS, where, ("name", "kind", "dist"))
    return NodeSpec(obj["name"], obj["kind"], obj["dist"], obj.get("resource"), obj.get("join", "all_of"))


def _edge_from_json(obj: Any, where: str) -> EdgeSpec:
    _reject_unknown(obj, _EDGE_KEYS, where, ("from", "to"))
    return EdgeSpec(obj["from"], obj["to"], obj.get("latency"))


def _dist_from_json(obj: Any, where: str) -> ServiceDistribution:
    try:
        return dists.from_json(obj)
    except DistributionError as exc:
        raise GraphError(f"{where}: {exc}") from exc


def spec_from_json(obj: Any) -> FlowGraphSpec:
    _reject_unknown(obj, _TOP_KEYS, "pipeline", sorted(_TOP_KEYS))
    if not isinstance(obj["distributions"], dict):
        raise GraphError("pipeline: 'distributions' must be an object mapping names to distributions")
    table = {}
    for name, d in obj["distributions"].items():
        if isinstance(d, dict) and "name" in d and d["name"] != name:
            raise GraphError(f"distribution {name!r}: inner name {d['name']!r} does not match")
        table[name] = _dist_from_json(d, f"distribution {name!r}")
    for key in ("nodes", "edges", "resources", "per_stream_nodes"):
        if not isinstance(obj[key], list):
            raise GraphError(f"pipeline: {key!r} must be a list")
    resources = []
    for i, r in enumerate(obj["resources"]):
        _reject_unknown(r, _RES_KEYS, f"resources[{i}]", ("name",))
        resources.append(ExclusiveResource(r["name"], r.get("capacity", 1)))
    return FlowGraphSpec(
        nodes=tuple(_node_from_json(n, f"nodes[{i}]") for i, n in enumerate(obj["nodes"])),
        edges=tuple(_edge_from_json(e, f"edges[{i}]") for i, e in enumerate(obj["edges"])),
        resources=tuple(resources),
        per_stream_nodes=tuple(obj["per_stream_nodes"]),
        distributions=table,
    )


def spec_to_json(spec: FlowGraphSpec) -> dict[str, Any]:
    def node(n: NodeSpec) -> dict[str, Any]:
        obj: dict[str, Any] = {"name": n.name, "kind": n.kind, "dist": n.distribution_ref}
        if n.resource_ref is not None:
            obj["resource"] = n.resource_ref
        if n.join_policy != "all_of":
            obj["join"] = n.join_policy
        return obj

    def edge(e: EdgeSpec) -> dict[str, Any]:
        obj: dict[str, Any] = {"from": e.src, "to": e.dst}
        if e.latency_ref is not None:
            obj["latency"] = e.latency_ref
        return obj

    return {
        "nodes": [node(n) for n in spec.nodes],
        "edges": [edge(e) for e in spec.edges],
        "resources": [{"name": r.name, "capacity": r.capacity} for r in spec.resources],
        "distributions": {k: d.to_json() for k, d in spec.distributions.items()},
        "per_stream_nodes": list(spec.per_stream_nodes),
    }


def load_pipeline(path: str | Path) -> FlowGraphSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON ({exc})") from exc
    return spec_from_json(obj)


def dump_pipeline(spec: FlowGraphSpec) -> str:
    return json.dumps(spec_to_json(spec), indent=2) + "\n"


def modification_from_json(obj: Any) -> Modification:
    if not isinstance(obj, dict) or obj.get("kind") not in MOD_KINDS:
        raise GraphError(f"modification: 'kind' must be one of {list(MOD_KINDS)}")
    kind = obj["kind"]
    if kind == "add_node":
        _reject_unknown(obj, {"kind", "node", "edges", "distribution"}, "add_node", ("node", "edges"))
        dist = _dist_from_json(obj["distribution"], "add_node") if "distribution" in obj else None
        edges = [_edge_from_json(e, f"add_node.edges[{i}]") for i, e in enumerate(obj["edges"])]
        return Modification.add_node(_node_from_json(obj["node"], "add_node.node"), edges, dist)
    if kind in ("remove_node", "zero_node"):
        _reject_unknown(obj, {"kind", "node"}, kind, ("node",))
        return Modification(kind, node=obj["node"])
    if kind == "set_distribution":
        _reject_unknown(obj, {"kind", "node", "distribution"}, kind, ("node", "distribution"))
        return Modification.set_distribution(obj["node"], _dist_from_json(obj["distribution"], kind))
    _reject_unknown(obj, {"kind", "from", "to", "distribution"}, kind, ("from", "to"))
    d = obj.get("distribution")
    return Modification.set_edge_latency(obj["from"], obj["to"], None if d is None else _dist_from_json(d, kind))


def load_modification(path: str | Path) -> Modification:
    return modification_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
