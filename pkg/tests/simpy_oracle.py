"""Independent reference model written directly with SimPy processes.

Each node instance is a process running the basic-node or async-node loop;
the CPU pool and exclusive resources are ``simpy.Resource`` objects. It
shares nothing with ``hetsim.engine`` beyond the pipeline description, and
only supports order-preserving graphs with all_of joins (it takes one
message from every predecessor queue per iteration).
"""

from __future__ import annotations

import simpy

from hetsim.distributions import RngState
from hetsim.graph import FlowGraphSpec


def simulate_simpy(spec: FlowGraphSpec, streams: int, workers: int, frames: int, seed: int = 0):
    env = simpy.Environment()
    cpu = simpy.Resource(env, capacity=workers)
    res = {r.name: simpy.Resource(env, capacity=r.capacity) for r in spec.resources}
    completions = {s: [] for s in range(streams)}

    def draw(dist, rng):
        return int(dist.ppf(rng.uniform()) + 0.5)

    for s in range(streams):
        queues = {(e.src, e.dst): simpy.Store(env) for e in spec.edges}

        def node_proc(node, s=s, queues=queues):
            dist = spec.distributions[node.distribution_ref]
            rng = RngState.for_key(seed, f"{node.name}#{s}")
            ins = [queues[(e.src, e.dst)] for e in spec.edges if e.dst == node.name]
            outs = [queues[(e.src, e.dst)] for e in spec.edges if e.src == node.name]
            for frame in range(frames):
                for q in ins:
                    yield q.get()
                if node.kind == "exclusive":
                    core = cpu.request()
                    yield core
                    lock = res[node.resource_ref].request()
                    yield lock
                    cpu.release(core)
                    yield env.timeout(draw(dist, rng))
                    res[node.resource_ref].release(lock)
                    core = cpu.request()
                    yield core
                    for q in outs:
                        q.put(frame)
                    cpu.release(core)
                else:
                    core = cpu.request()
                    yield core
                    yield env.timeout(draw(dist, rng))
                    for q in outs:
                        q.put(frame)
                    if node.kind == "sink":
                        completions[s].append(env.now)
                    cpu.release(core)

        for node in spec.nodes:
            env.process(node_proc(node))
    env.run()
    return completions
