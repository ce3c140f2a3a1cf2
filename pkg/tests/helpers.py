from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from hetsim.distributions import Constant, Empirical, Exponential, LogNormal, Uniform
from hetsim.graph import EdgeSpec, ExclusiveResource, FlowGraphSpec, NodeSpec

MS = 1000
ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "hetsim" / "data"
REF = ROOT / "ref.json"


def chain(stages, capacity=1, resource="gpu"):
    """Linear pipeline from ``(name, kind, service_ms)`` triples."""
    nodes, edges, table = [], [], {}
    for i, (name, kind, t) in enumerate(stages):
        nodes.append(NodeSpec(name, kind, name, resource if kind == "exclusive" else None))
        table[name] = Constant(t * MS) if not hasattr(t, "ppf") else t
        if i:
            edges.append(EdgeSpec(stages[i - 1][0], name))
    return FlowGraphSpec(nodes, edges, [ExclusiveResource(resource, capacity)],
                         [n for n, k, _ in stages if k != "exclusive"], table)


def ref_shape(a=8, gpu=5, b=1, c=4, d=1, e=None):
    """A -> GPU -> B -> C -> D, optionally with A -> E -> D."""
    nodes = [NodeSpec("A", "source", "A"), NodeSpec("GPU", "exclusive", "GPU", "gpu"),
             NodeSpec("B", "basic", "B"), NodeSpec("C", "basic", "C"), NodeSpec("D", "sink", "D")]
    edges = [EdgeSpec("A", "GPU"), EdgeSpec("GPU", "B"), EdgeSpec("B", "C"), EdgeSpec("C", "D")]
    table = {k: Constant(v * MS) for k, v in dict(A=a, GPU=gpu, B=b, C=c, D=d).items()}
    per_stream = ["A", "B", "C", "D"]
    if e is not None:
        nodes.append(NodeSpec("E", "basic", "E"))
        edges += [EdgeSpec("A", "E"), EdgeSpec("E", "D")]
        table["E"] = Constant(e * MS)
        per_stream.append("E")
    return FlowGraphSpec(nodes, edges, [ExclusiveResource("gpu", 1)], per_stream, table)


def random_dist(rng: np.random.Generator):
    k = int(rng.integers(5))
    if k == 0:
        return Constant(float(rng.integers(0, 5000)))
    if k == 1:
        lo = float(rng.integers(0, 3000))
        return Uniform(lo, lo + float(rng.integers(0, 3000)))
    if k == 2:
        return Exponential(float(rng.integers(100, 4000)))
    if k == 3:
        return LogNormal(float(rng.uniform(5, 8)), float(rng.uniform(0, 0.8)))
    return Empirical(tuple(float(x) for x in rng.integers(0, 5000, size=int(rng.integers(1, 20)))))


def random_graph(rng: np.random.Generator, max_nodes: int = 8) -> FlowGraphSpec:
    """Random valid DAG: sources first, sinks last, every node wired both ways."""
    n = int(rng.integers(3, max_nodes + 1))
    n_src = int(rng.integers(1, min(2, n - 2) + 1))
    n_sink = int(rng.integers(1, min(2, n - n_src - 1) + 1))
    n_mid = n - n_src - n_sink
    names = [f"n{i}" for i in range(n)]
    kinds = ["source"] * n_src + [str(rng.choice(["basic", "exclusive"])) for _ in range(n_mid)] \
        + ["sink"] * n_sink
    resources = [ExclusiveResource("r0", int(rng.integers(1, 3))), ExclusiveResource("r1", 1)]
    table, nodes = {}, []
    for name, kind in zip(names, kinds):
        table[name] = random_dist(rng)
        res = str(rng.choice(["r0", "r1"])) if kind == "exclusive" else None
        nodes.append(NodeSpec(name, kind, name, res, str(rng.choice(["all_of", "all_of", "any_of"]))))
    edges = {}
    for j in range(n_src, n):
        lo = 0
        hi = min(j, n - n_sink)
        i = int(rng.integers(lo, hi))
        edges[(names[i], names[j])] = None
    for i in range(n - n_sink):
        if not any(s == names[i] for s, _ in edges):
            j = int(rng.integers(max(i + 1, n_src), n))
            edges[(names[i], names[j])] = None
    for _ in range(int(rng.integers(0, 3))):
        i = int(rng.integers(0, n - n_sink))
        j = int(rng.integers(max(i + 1, n_src), n))
        edges[(names[i], names[j])] = None
    edge_specs = []
    for k, (s, d) in enumerate(sorted(edges, key=lambda e: (names.index(e[0]), names.index(e[1])))):
        lat = None
        if rng.random() < 0.2:
            lat = f"lat{k}"
            table[lat] = random_dist(rng)
        edge_specs.append(EdgeSpec(s, d, lat))
    return FlowGraphSpec(nodes, edge_specs, resources,
                         [nm for nm, k in zip(names, kinds) if k != "exclusive"], table)


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
