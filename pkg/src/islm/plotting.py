"""Optional PNG figures drawn with matplotlib (non-interactive Agg backend).

These complement the SVG files and are only written when the CLI gets
``--figures``. They are not part of the byte-determinism guarantee.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from islm.isocline import IsoclineCurve  # noqa: E402
from islm.phase_plane import Equilibrium  # noqa: E402
from islm.scenario import BranchDiagram, HysteresisResult  # noqa: E402
from islm.slowfast import CycleReport, Trajectory  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def phase_figure(path: Path, curves: Sequence[IsoclineCurve], eqs: Sequence[Equilibrium] = (),
                 cycle: CycleReport | None = None, trajectory: Trajectory | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for c in curves:
        for arc in c.arcs:
            seg = c.points[arc.start:arc.stop + 1]
            style = "-" if arc.stability == "Stable" else "--"
            ax.plot(seg[:, 0], seg[:, 1], style, color="C0" if c.which.value == "IS" else "C2",
                    lw=1.6, label=f"{c.which.value} {arc.label}")
    if trajectory is not None:
        ax.plot(trajectory.y, trajectory.r, color="C3", lw=0.8, label="trajectory")
    if cycle is not None:
        pts = cycle.cycle_samples
        ax.plot(pts[:, 0], pts[:, 1], color="C3", lw=1.2, label=f"cycle ({cycle.orientation})")
    for e in eqs:
        ax.plot(e.state.y, e.state.r, "o", mfc="white", mec="k")
        ax.annotate(e.kind.value, (e.state.y, e.state.r), fontsize=7,
                    xytext=(4, 4), textcoords="offset points")
    ax.set_xlabel("Y")
    ax.set_ylabel("R")
    ax.legend(fontsize=7, loc="best")
    return _save(fig, path)


def branch_figure(path: Path, diagram: BranchDiagram) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    by_kind: dict[str, list[tuple[float, float]]] = {}
    for v, _, y, _, kind in diagram.rows():
        by_kind.setdefault(kind, []).append((v, y))
    for kind in sorted(by_kind):
        xs, ys = zip(*by_kind[kind])
        ax.plot(xs, ys, ".", label=kind)
    for f in diagram.folds:
        ax.axvline(f.parameter_value, color="0.6", lw=0.8, ls=":")
    ax.set_xlabel(diagram.parameter.value)
    ax.set_ylabel("equilibrium Y")
    ax.legend(fontsize=7)
    return _save(fig, path)


def hysteresis_figure(path: Path, result: HysteresisResult, fast_index: int) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    turn = result.path.index(max(result.path))
    fast = [(s.y, s.r)[fast_index] for s in result.settled]
    ax.plot(result.path[:turn + 1], fast[:turn + 1], "-", color="C3", label="up")
    ax.plot(result.path[turn:], fast[turn:], "-", color="C4", label="down")
    ax.axvline(result.up_jump, color="C3", lw=0.8, ls=":")
    ax.axvline(result.down_jump, color="C4", lw=0.8, ls=":")
    ax.set_xlabel(result.parameter.value)
    ax.set_ylabel("Y" if fast_index == 0 else "R")
    ax.legend(fontsize=7)
    return _save(fig, path)
