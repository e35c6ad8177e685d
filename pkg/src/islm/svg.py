"""Deterministic SVG 1.1 emission for phase portraits and branch diagrams.

The data window is the bounding box of every drawn point widened by 5% on
each side; it is mapped onto a fixed pixel viewBox. Numbers are written
with Python's shortest round-trip ``repr`` so equal input gives equal bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from islm.errors import EmptyGeometry

MARGIN = 0.05
PAD = (60.0, 20.0, 20.0, 45.0)  # left, top, right, bottom in pixels

STYLE = """\
.frame{fill:none;stroke:#444;stroke-width:1}
.tick{stroke:#444;stroke-width:1}
.label{font-family:sans-serif;font-size:12px;fill:#222}
.isocline-stable{fill:none;stroke:#1f5fbf;stroke-width:2}
.isocline-unstable{fill:none;stroke:#1f5fbf;stroke-width:2;stroke-dasharray:6 4}
.isocline-slow{fill:none;stroke:#2a9d4a;stroke-width:1.5}
.trajectory{fill:none;stroke:#c0392b;stroke-width:1.2}
.singular{fill:none;stroke:#777;stroke-width:1;stroke-dasharray:2 3}
.branch-up{fill:none;stroke:#c0392b;stroke-width:1.5}
.branch-down{fill:none;stroke:#8e44ad;stroke-width:1.5}
.arrow{stroke:none;fill:#333}
.equilibrium{stroke:#000;stroke-width:1;fill:#fff}
"""


@dataclass(frozen=True)
class Polyline:
    points: Sequence[Sequence[float]]
    cls: str
    arrows: int = 0  # number of arrowheads spaced along the line in point order


@dataclass(frozen=True)
class Marker:
    x: float
    y: float
    cls: str = "equilibrium"
    title: str = ""


def _num(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step)
    out = []
    k = first
    while k * step <= hi + 1e-12 * span:
        out.append(round(k * step, 12))
        k += 1
    return out


def _arrowheads(pts: np.ndarray, count: int, size: float) -> list[np.ndarray]:
    seg = np.diff(pts, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    total = float(lens.sum())
    if count <= 0 or total == 0.0:
        return []
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    heads = []
    for j in range(count):
        target = total * (j + 0.5) / count
        k = int(np.clip(np.searchsorted(cum, target) - 1, 0, len(seg) - 1))
        while lens[k] == 0.0 and k + 1 < len(seg):
            k += 1
        if lens[k] == 0.0:
            continue
        u = seg[k] / lens[k]
        tip = pts[k] + u * (target - cum[k])
        nrm = np.array([-u[1], u[0]])
        base = tip - u * size
        heads.append(np.array([tip, base + nrm * size * 0.45, base - nrm * size * 0.45]))
    return heads


def emit_svg(polylines: Sequence[Polyline], markers: Sequence[Marker] = (), *,
             x_label: str = "", y_label: str = "", title: str = "",
             size: tuple[int, int] = (720, 540)) -> bytes:
    """Render polylines and markers; raises :class:`EmptyGeometry` with nothing to draw."""
    arrays = [np.asarray(p.points, dtype=float).reshape(-1, 2) for p in polylines]
    drawable = [a for a in arrays if len(a) >= 2]
    if not drawable and not markers:
        raise EmptyGeometry("nothing to draw")
    stack = [a for a in arrays if len(a)] + ([np.array([[m.x, m.y] for m in markers])]
                                            if markers else [])
    allpts = np.vstack(stack)
    if not np.all(np.isfinite(allpts)):
        raise ValueError("geometry contains non-finite coordinates")
    x0, y0 = allpts.min(axis=0)
    x1, y1 = allpts.max(axis=0)
    wx = (x1 - x0) or max(abs(x0), 1.0)
    wy = (y1 - y0) or max(abs(y0), 1.0)
    x0, x1 = x0 - MARGIN * wx, x1 + MARGIN * wx
    y0, y1 = y0 - MARGIN * wy, y1 + MARGIN * wy

    width, height = size
    left, top, right, bottom = PAD
    pw, ph = width - left - right, height - top - bottom

    def px(p: np.ndarray) -> np.ndarray:
        return np.column_stack([left + (p[:, 0] - x0) / (x1 - x0) * pw,
                                top + (y1 - p[:, 1]) / (y1 - y0) * ph])

    def fmt_pts(p: np.ndarray) -> str:
        return " ".join(f"{_num(a)},{_num(b)}" for a, b in p)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<desc>data window x=[{_num(x0)}, {_num(x1)}] y=[{_num(y0)}, {_num(y1)}]</desc>',
        f"<style>\n{STYLE}</style>",
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect class="frame" x="{_num(left)}" y="{_num(top)}" '
               f'width="{_num(pw)}" height="{_num(ph)}"/>')
    for t in _ticks(x0, x1):
        xp = left + (t - x0) / (x1 - x0) * pw
        out.append(f'<line class="tick" x1="{_num(xp)}" y1="{_num(top + ph)}" '
                   f'x2="{_num(xp)}" y2="{_num(top + ph + 5)}"/>')
        out.append(f'<text class="label" x="{_num(xp)}" y="{_num(top + ph + 18)}" '
                   f'text-anchor="middle">{_num(t)}</text>')
    for t in _ticks(y0, y1):
        yp = top + (y1 - t) / (y1 - y0) * ph
        out.append(f'<line class="tick" x1="{_num(left - 5)}" y1="{_num(yp)}" '
                   f'x2="{_num(left)}" y2="{_num(yp)}"/>')
        out.append(f'<text class="label" x="{_num(left - 8)}" y="{_num(yp + 4)}" '
                   f'text-anchor="end">{_num(t)}</text>')
    if x_label:
        out.append(f'<text class="label" x="{_num(left + pw / 2)}" y="{_num(height - 8)}" '
                   f'text-anchor="middle">{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text class="label" x="14" y="{_num(top + ph / 2)}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {_num(top + ph / 2)})">{escape(y_label)}</text>')

    for poly, arr in zip(polylines, arrays):
        if len(arr) < 2:
            continue
        p = px(arr)
        out.append(f'<polyline class="{escape(poly.cls)}" points="{fmt_pts(p)}"/>')
        for head in _arrowheads(p, poly.arrows, 9.0):
            out.append(f'<polygon class="arrow" points="{fmt_pts(head)}"/>')
    for m in markers:
        p = px(np.array([[m.x, m.y]]))[0]
        circle = f'<circle class="{escape(m.cls)}" cx="{_num(p[0])}" cy="{_num(p[1])}" r="4"'
        if m.title:
            out.append(f"{circle}><title>{escape(m.title)}</title></circle>")
        else:
            out.append(circle + "/>")
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
