import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from hetsim.cli import build_parser, main, parse_streams

from helpers import DATA, REF

NS = "{http://www.w3.org/2000/svg}"
VERB_FLAGS = {
    "validate": ["--pipeline"],
    "ingest": ["--trace", "--out", "--per-node"],
    "run": ["--pipeline", "--streams", "--workers", "--frames", "--seed", "--warmup", "--out", "--events"],
    "sweep": ["--pipeline", "--streams", "--workers", "--frames", "--seed", "--replications", "--warmup",
              "--out", "--chart", "--measured", "--jobs"],
    "ab": ["--pipeline", "--streams", "--modification", "--replications", "--out", "--chart"],
    "optimize": ["--pipeline", "--streams", "--node", "--ideal", "--overhead", "--out"],
    "compare": ["--baseline", "--variant", "--measured", "--out", "--chart"],
    "report": ["--input", "--chart", "--out"],
}
FAST = ["--frames", "200"]


def test_parse_streams():
    assert parse_streams("1..4,8,12") == [1, 2, 3, 4, 8, 12]
    assert parse_streams("3,1,3") == [1, 3]


@pytest.mark.parametrize("verb", sorted(VERB_FLAGS))
def test_help_documents_flags(verb, capsys):
    with pytest.raises(SystemExit) as exc:
        main([verb, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in VERB_FLAGS[verb]:
        assert flag in text


@pytest.mark.parametrize("argv", [[], ["bogus"], ["validate"], ["sweep", "--pipeline", "x", "--streams", "4..1"],
                                  ["run", "--pipeline", "x", "--workers", "0"], ["run", "--frobnicate"]])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_validate_reference(capsys):
    assert main(["validate", "--pipeline", str(REF)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_shipped_ref_matches_package_copy():
    assert REF.read_bytes() == (DATA / "ref.json").read_bytes()


def test_validate_reports_violations(tmp_path, capsys):
    obj = json.loads(REF.read_text())
    obj["edges"].append({"from": "D", "to": "A"})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    assert main(["validate", "--pipeline", str(bad)]) == 1
    captured = capsys.readouterr()
    err_lines = captured.err.strip().splitlines()
    assert len(err_lines) == 1 and err_lines[0].startswith("error: ")
    assert "sink" in captured.out or "source" in captured.out


@pytest.mark.parametrize("argv", [
    ["validate", "--pipeline", "/nonexistent/p.json"],
    ["run", "--pipeline", str(REF), "--frames", "2", "--warmup", "0.5"],
    ["optimize", "--pipeline", str(REF), "--node", "GPU"],
    ["optimize", "--pipeline", str(REF), "--node", "nope", "--ideal"],
])
def test_domain_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    err = capsys.readouterr().err.splitlines()
    assert len(err) == 1 and err[0].startswith("error: ")


def test_run_outputs_are_byte_identical(tmp_path, capsys):
    outs = []
    for tag in "ab":
        argv = ["run", "--pipeline", str(REF), "--streams", "3", "--seed", "4", *FAST,
                "--out", str(tmp_path / f"{tag}.json"), "--events", str(tmp_path / f"{tag}.csv")]
        assert main(argv) == 0
        outs.append(((tmp_path / f"{tag}.json").read_bytes(), (tmp_path / f"{tag}.csv").read_bytes()))
    assert outs[0] == outs[1]
    doc = json.loads(outs[0][0])
    assert {"mean_fps", "aggregate_fps", "utilization"} <= set(doc)
    assert outs[0][1].startswith(b"time_us,node,kind,stream,frame\n")
    assert "bottleneck=" in capsys.readouterr().out


def test_seed_env_fallback(tmp_path, monkeypatch):
    # a random GPU distribution so that the seed matters
    ovh = json.loads((DATA / "cache_overhead.json").read_text())
    obj = json.loads(REF.read_text())
    obj["distributions"]["GPU"] = {k: v for k, v in ovh.items() if k != "name"}
    pipe = tmp_path / "random.json"
    pipe.write_text(json.dumps(obj))

    def run(tag, *extra):
        out = tmp_path / f"{tag}.csv"
        assert main(["run", "--pipeline", str(pipe), *FAST, "--events", str(out), *extra]) == 0
        return out.read_bytes()

    monkeypatch.setenv("HETSIM_SEED", "9")
    from_env = run("env")
    assert from_env == run("flag", "--seed", "9")
    assert from_env != run("other", "--seed", "10")
    monkeypatch.setenv("HETSIM_SEED", "oops")
    assert main(["run", "--pipeline", str(pipe), *FAST]) == 1


def test_failed_run_leaves_no_output(tmp_path):
    out, chart = tmp_path / "s.csv", tmp_path / "s.svg"
    measured = tmp_path / "m.csv"
    measured.write_text("streams,fps\n99,10\n")  # no prediction for 99 streams
    argv = ["sweep", "--pipeline", str(REF), "--streams", "1..2", "--replications", "1", *FAST,
            "--out", str(out), "--chart", str(chart), "--measured", str(measured)]
    assert main(argv) == 1
    assert not out.exists() and not chart.exists()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["m.csv"]


def test_sweep_compare_report(tmp_path, capsys):
    csv, svg = tmp_path / "sweep.csv", tmp_path / "sweep.svg"
    assert main(["sweep", "--pipeline", str(REF), "--streams", "1..6", "--replications", "2", *FAST,
                 "--out", str(csv), "--chart", str(svg), "--jobs", "2"]) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "streams,stream_id,fps" and len(lines) == 1 + 2 * sum(range(1, 7))
    root = ET.fromstring(svg.read_text())
    [g] = root.findall(f"{NS}g")
    ys = [float(c.get("data-y")) for c in g.findall(f"{NS}circle")]
    assert len(ys) == 6 and all(b <= a + 1e-9 for a, b in zip(ys, ys[1:]))
    poly = [float(p.split(",")[1]) for p in g.find(f"{NS}polyline").get("points").split()]
    assert all(b >= a for a, b in zip(poly, poly[1:]))  # SVG y grows downwards

    measured = tmp_path / "measured.csv"
    from hetsim.cli import _read_sweep_csv
    curve = _read_sweep_csv(str(csv))
    measured.write_text("streams,fps\n" + "".join(f"{s},{f * 1.1!r}\n" for s, f in curve.items()))
    capsys.readouterr()
    assert main(["compare", "--baseline", str(csv), "--measured", str(measured),
                 "--out", str(tmp_path / "cmp.csv")]) == 0
    out = capsys.readouterr().out
    assert "prediction_error_mean=0.090909" in out
    assert main(["compare", "--baseline", str(csv), "--variant", str(csv)]) == 0
    assert "slowdown=1.0000" in capsys.readouterr().out
    assert main(["report", "--input", str(csv), "--chart", str(tmp_path / "r.svg"),
                 "--out", str(tmp_path / "r.md")]) == 0
    assert (tmp_path / "r.md").read_text().startswith("| input |")


def test_ab_and_optimize(tmp_path, capsys):
    assert main(["ab", "--pipeline", str(REF), "--modification", str(DATA / "add_node_e.json"),
                 "--streams", "1,12", "--replications", "1", *FAST,
                 "--out", str(tmp_path / "ab.csv"), "--chart", str(tmp_path / "ab.svg")]) == 0
    rows = (tmp_path / "ab.csv").read_text().splitlines()
    assert rows[0] == "x,baseline_fps,add_node_fps,slowdown"
    legends = [e.text for e in ET.fromstring((tmp_path / "ab.svg").read_text()).iter(f"{NS}text")
               if e.get("class") == "legend"]
    assert legends == ["baseline", "add_node"]
    capsys.readouterr()
    assert main(["optimize", "--pipeline", str(REF), "--node", "GPU", "--ideal", "--streams", "6", *FAST,
                 "--overhead", str(DATA / "cache_overhead.json"), "--out", str(tmp_path / "o.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ideal_speedup=") and "real_speedup=" in out
    assert set(json.loads((tmp_path / "o.json").read_text())) == {"ideal_speedup", "real_speedup"}


def test_ingest(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    trace.write_text("node,stream,start_us,end_us\nA,0,0,100\nA,1,0,300\nGPU,0,100,5100\n")
    assert main(["ingest", "--trace", str(trace), "--out", str(tmp_path / "b.json")]) == 0
    assert set(json.loads((tmp_path / "b.json").read_text())) == {"A", "GPU"}
    assert main(["ingest", "--trace", str(trace), "--out", str(tmp_path / "d"), "--per-node"]) == 0
    assert sorted(p.name for p in (tmp_path / "d").iterdir()) == ["A.json", "GPU.json"]
    trace.write_text("node,stream,start_us,end_us\nA,0,10,5\n")
    capsys.readouterr()
    assert main(["ingest", "--trace", str(trace), "--out", str(tmp_path / "c.json")]) == 1
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "c.json").exists()


def test_module_entry_point():
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "hetsim", "validate", "--pipeline", str(REF)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and proc.stdout.strip() == "ok"
    proc = subprocess.run([sys.executable, "-m", "hetsim", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage:" in proc.stderr


def test_parser_has_every_verb():
    sub = next(a for a in build_parser()._actions if a.dest == "verb")
    assert set(sub.choices) == set(VERB_FLAGS)
