import xml.etree.ElementTree as ET

import pytest

from hetsim.charts import Series, render_chart, render_svg
from hetsim.errors import HetsimError

NS = "{http://www.w3.org/2000/svg}"


def parse(text):
    return ET.fromstring(text)


def test_line_chart_structure():
    svg = parse(render_svg([Series("fps", [1, 2, 3], [30, 20, 10], ci=[1, 1, 0]),
                            Series("other <b>", [1, 3], [5, 6])],
                           "line", title="t", x_label="streams", y_label="fps"))
    groups = svg.findall(f"{NS}g")
    assert [g.get("data-label") for g in groups] == ["fps", "other <b>"]
    pts = groups[0].findall(f"{NS}circle")
    assert [(p.get("data-x"), p.get("data-y")) for p in pts] == [("1", "30"), ("2", "20"), ("3", "10")]
    assert len(groups[0].findall(f"{NS}polyline")) == 1
    assert len([e for e in groups[0] if e.get("class") == "ci"]) == 3
    legends = [e.text for e in svg.iter(f"{NS}text") if e.get("class") == "legend"]
    assert legends == ["fps", "other <b>"]


def test_bar_chart_structure():
    svg = parse(render_svg([Series("ideal", [0, 1], [13.8, 12.0])], "bar"))
    [g] = svg.findall(f"{NS}g")
    assert [r.get("data-y") for r in g.findall(f"{NS}rect")] == ["13.8", "12"]


def test_byte_stable(tmp_path):
    s = [Series("x", [1, 2], [1.5, 2.5])]
    a = render_chart(s, "line", tmp_path / "a.svg", title="x")
    b = render_chart(s, "line", tmp_path / "b.svg", title="x")
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("series, kind", [([], "line"), ([Series("a", [1], [])], "line"),
                                          ([Series("a", [1], [2], ci=[1, 2])], "line"),
                                          ([Series("a", [1], [2])], "pie")])
def test_rejects(series, kind):
    with pytest.raises(HetsimError):
        render_svg(series, kind)
