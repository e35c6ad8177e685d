"""Deterministic CSV/JSON writers and SVG scene builders for the CLI."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from islm.econ_model import FastSide, ModelConfig, short_rate
from islm.isocline import IsoclineCurve, Which, residual
from islm.phase_plane import Equilibrium
from islm.scenario import HysteresisResult
from islm.slowfast import CycleReport, SingularOrbit, Trajectory, jump_mask
from islm.svg import Marker, Polyline, emit_svg

ISOCLINE_COLUMNS = ("y", "r", "i_s", "residual", "arc_label", "stability")
TRAJECTORY_COLUMNS = ("t", "y", "r", "i_s", "dy_dt", "dr_dt", "is_jump")
SWEEP_COLUMNS = ("parameter_value", "eq_index", "y", "r", "kind")


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays so the stdlib serializers see plain types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def json_bytes(obj: Any) -> bytes:
    return (json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def csv_bytes(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


def write(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path


def isocline_rows(curve: IsoclineCurve, cfg: ModelConfig):
    res = residual(curve.which, curve.y, curve.r, cfg)
    i_s = short_rate(curve.r, cfg)
    for k in range(len(curve.points)):
        label, stab = curve.label_at(k)
        yield curve.y[k], curve.r[k], i_s[k], float(res[k]), label, stab


def trajectory_rows(tr: Trajectory, cfg: ModelConfig, factor: float = 10.0):
    mask = jump_mask(tr.dy, tr.dr, cfg, factor) if cfg.epsilon > 0 else np.zeros(len(tr.t), bool)
    i_s = short_rate(tr.r, cfg)
    for k in range(len(tr.t)):
        yield tr.t[k], tr.y[k], tr.r[k], i_s[k], tr.dy[k], tr.dr[k], int(mask[k])


def equilibria_doc(eqs: Sequence[Equilibrium]) -> dict:
    return {"equilibria": [e.to_dict() for e in eqs], "count": len(eqs)}


def _curve_polylines(curve: IsoclineCurve, fast_which: Which) -> list[Polyline]:
    if curve.which is not fast_which:
        return [Polyline(curve.points, "isocline-slow")]
    out = []
    for arc in curve.arcs:
        cls = "isocline-stable" if arc.stability == "Stable" else "isocline-unstable"
        out.append(Polyline(curve.points[arc.start:arc.stop + 1], cls))
    return out


def phase_svg(cfg: ModelConfig, curves: Sequence[IsoclineCurve], cycle: CycleReport | None,
              eqs: Sequence[Equilibrium] = (), orbit: SingularOrbit | None = None) -> bytes:
    """Phase portrait in (Y, R) axes: isoclines, optional cycle with arrows, equilibria."""
    fast = Which.IS if cfg.fast_side is FastSide.GOODS else Which.LM
    polys: list[Polyline] = []
    for c in curves:
        polys.extend(_curve_polylines(c, fast))
    if orbit is not None:
        polys.append(Polyline(orbit.points, "singular"))
    if cycle is not None:
        polys.append(Polyline(cycle.cycle_samples, "trajectory", arrows=6))
    marks = [Marker(e.state.y, e.state.r, "equilibrium", e.kind.value) for e in eqs]
    return emit_svg(polys, marks, x_label="Y (income)", y_label="R (long-term rate)",
                    title="Phase portrait")


def hysteresis_svg(cfg: ModelConfig, result: HysteresisResult,
                   curve: IsoclineCurve | None = None) -> bytes:
    """Branch diagram: parameter on the horizontal axis, fast variable vertical."""
    goods = cfg.fast_side is FastSide.GOODS
    fast_of = (lambda s: s.y) if goods else (lambda s: s.r)
    turn = result.path.index(max(result.path))
    up = [(v, fast_of(s)) for v, s in zip(result.path[:turn + 1], result.settled[:turn + 1])]
    down = [(v, fast_of(s)) for v, s in zip(result.path[turn:], result.settled[turn:])]
    polys: list[Polyline] = []
    if curve is not None and result.parameter.value == "Slow":
        # The folded isocline in (slow, fast) coordinates is the equilibrium branch set.
        pts = curve.points[:, ::-1] if goods else curve.points
        lo, hi = min(result.path), max(result.path)
        for arc in curve.arcs:
            seg = pts[arc.start:arc.stop + 1]
            seg = seg[(seg[:, 0] >= lo) & (seg[:, 0] <= hi)]
            cls = "isocline-stable" if arc.stability == "Stable" else "isocline-unstable"
            polys.append(Polyline(seg, cls))
    polys.append(Polyline(up, "branch-up", arrows=3))
    polys.append(Polyline(down, "branch-down", arrows=3))
    fast_name = "Y (income)" if goods else "R (long-term rate)"
    return emit_svg(polys, x_label=result.parameter.value, y_label=fast_name,
                    title="Hysteresis loop")
