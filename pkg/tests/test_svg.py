import re
import xml.etree.ElementTree as ET

import pytest

from islm.errors import EmptyGeometry
from islm.isocline import Which
from islm.report import phase_svg
from islm.svg import Marker, Polyline, emit_svg

from conftest import cached_curve, cached_cycle

NS = {"s": "http://www.w3.org/2000/svg"}


def _window(svg: bytes):
    m = re.search(rb"x=\[([^,]+), ([^\]]+)\] y=\[([^,]+), ([^\]]+)\]", svg)
    return tuple(float(g) for g in m.groups())


def test_two_point_polyline():
    svg = emit_svg([Polyline([(1.0, 2.0), (3.0, 5.0)], "trajectory")])
    root = ET.fromstring(svg)
    assert len(root.findall(".//s:polyline", NS)) == 1
    x0, x1, y0, y1 = _window(svg)
    assert x0 < 1.0 and x1 > 3.0 and y0 < 2.0 and y1 > 5.0


def test_output_is_byte_deterministic():
    polys = [Polyline([(0.0, 0.0), (1.0, 0.5), (2.0, 0.1)], "trajectory", arrows=2)]
    marks = [Marker(1.0, 0.5, title="Saddle")]
    assert emit_svg(polys, marks, title="t") == emit_svg(polys, marks, title="t")


def test_nothing_to_draw():
    with pytest.raises(EmptyGeometry):
        emit_svg([])
    with pytest.raises(EmptyGeometry):
        emit_svg([Polyline([(1.0, 1.0)], "trajectory")])


def test_non_finite_points_are_rejected():
    with pytest.raises(ValueError):
        emit_svg([Polyline([(0.0, 0.0), (float("nan"), 1.0)], "trajectory")])


def test_arrowheads_follow_request():
    svg = emit_svg([Polyline([(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)], "trajectory", arrows=4)])
    assert len(ET.fromstring(svg).findall(".//s:polygon", NS)) == 4


def test_phase_portrait_distinguishes_arc_stability(kaldor):
    curves = [cached_curve("kaldor", "IS"), cached_curve("kaldor", "LM")]
    svg = phase_svg(kaldor, curves, cached_cycle("kaldor", 1e-3))
    root = ET.fromstring(svg)
    classes = [p.get("class") for p in root.findall(".//s:polyline", NS)]
    assert classes.count("isocline-stable") == 2
    assert classes.count("isocline-unstable") == 1
    assert "isocline-slow" in classes and "trajectory" in classes
