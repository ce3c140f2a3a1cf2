import pytest

from hetsim.distributions import Constant
from hetsim.engine import SimConfig
from hetsim.errors import HetsimError
from hetsim.graph import Modification, NodeSpec
from hetsim.scenarios import (StudyError, SweepSpec, run_ab_study, run_optimization_study,
                              run_sweep)

from helpers import MS, chain, ref_shape

CFG = SimConfig(cpu_workers=12, frames_per_stream=200)


def test_sweep_shape_and_seeds():
    spec = chain([("A", "source", 2), ("GPU", "exclusive", 5), ("B", "sink", 1)])
    sweep = SweepSpec(spec, CFG, [4, 1, 2, 2], replications=3)
    assert sweep.stream_counts == (1, 2, 4)
    assert [sweep.seed(r) for r in range(3)] == [0, 1, 2]
    res = run_sweep(sweep)
    assert len(res.points) == 3 * 3
    assert sorted(res.summary) == [1, 2, 4]
    # constant services: replicates agree, so the interval collapses
    assert res.summary[2].ci95_halfwidth == 0.0
    assert res.summary[1].mean_fps_per_stream == pytest.approx(200, abs=1)
    assert res.summary[4].aggregate_fps == pytest.approx(200, rel=0.02)


def test_sweep_parallel_matches_serial():
    spec = ref_shape()
    sweep = SweepSpec(spec, CFG, [1, 3], replications=2)
    a, b = run_sweep(sweep), run_sweep(sweep, jobs=2)
    assert a.summary == b.summary


@pytest.mark.parametrize("kw", [dict(stream_counts=[]), dict(stream_counts=[0, 1]),
                                dict(stream_counts=[1], replications=0)])
def test_sweep_spec_rejects(kw):
    args = dict(base_spec=ref_shape(), cfg=CFG, stream_counts=[1], replications=1)
    args.update(kw)
    with pytest.raises(HetsimError):
        SweepSpec(**args)


def test_failing_point_names_streams_and_replicate():
    sweep = SweepSpec(ref_shape(), SimConfig(frames_per_stream=2, warmup_fraction=0.5), [2])
    with pytest.raises(StudyError) as err:
        run_sweep(sweep)
    assert err.value.streams == 2 and err.value.replicate == 0


def test_ab_study_identity_modification():
    base = ref_shape()
    mod = Modification.set_distribution("B", Constant(1 * MS))
    rep = run_ab_study(base, mod, SweepSpec(base, CFG, [1, 2]))
    assert rep.ratios() == {1: 1.0, 2: 1.0}


def test_ab_study_slower_node():
    base = ref_shape()
    mod = Modification.add_node(NodeSpec("E", "basic", "E"), [("A", "E"), ("E", "D")], Constant(20 * MS))
    rep = run_ab_study(base, mod, SweepSpec(base, CFG, [1]))
    assert rep.ratios()[1] == pytest.approx(2.5, abs=0.2)


def test_optimization_study_reports_single_ratios():
    base = ref_shape()
    out = run_optimization_study(base, "GPU", ideal=True, measured_overhead=Constant(2500),
                                 streams=6, cfg=CFG)
    assert set(out) == {"ideal_speedup", "real_speedup"}
    assert out["ideal_speedup"] >= out["real_speedup"] >= 1.0
    only_ideal = run_optimization_study(base, "GPU", streams=6, cfg=CFG)
    assert set(only_ideal) == {"ideal_speedup"}


def test_optimization_study_rejects():
    with pytest.raises(HetsimError):
        run_optimization_study(ref_shape(), "GPU", ideal=False)
    with pytest.raises(HetsimError):
        run_optimization_study(ref_shape(), "nope")
