"""IS and LM isoclines by pseudo-arclength continuation, folds and arc stability.

For the IS curve the fast variable is Y and the slow one R; for LM it is the
other way round. Arcs are ordered by the fast coordinate (Y for IS, i_S for
LM) and named A1, A2, A3.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from islm.econ_model import GridSpec, ModelConfig, default_grid, eval_functions, partials, short_rate
from islm.errors import AmbiguousSign, FoldCountMismatch, SeedNotFound

STEP_INIT = 1e-2
STEP_FLOOR = 1e-5
STEP_MAX = 5e-2
ANGLE_MAX = 0.08
CORRECT_TOL = 1e-12
FOLD_TOL = 1e-10
SIGN_TOL = 1e-12


class Which(str, enum.Enum):
    IS = "IS"
    LM = "LM"


@dataclass(frozen=True)
class Fold:
    y: float
    r: float
    index: int  # fold lies between samples index and index + 1
    slow: float


@dataclass(frozen=True)
class Arc:
    start: int
    stop: int  # inclusive
    label: str
    stability: str


@dataclass(frozen=True)
class FoldPair:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("fold pair needs low < high")


@dataclass
class IsoclineCurve:
    which: Which
    points: np.ndarray  # (n, 2) columns y, r
    folds: list[Fold] = field(default_factory=list)
    arcs: list[Arc] = field(default_factory=list)

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def r(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def fast(self) -> np.ndarray:
        return self.y if self.which is Which.IS else self.r

    @property
    def slow(self) -> np.ndarray:
        return self.r if self.which is Which.IS else self.y

    def arc(self, label: str) -> Arc:
        for a in self.arcs:
            if a.label == label:
                return a
        raise KeyError(label)

    def label_at(self, k: int) -> tuple[str, str]:
        for a in self.arcs:
            if a.start <= k <= a.stop:
                return a.label, a.stability
        return "", ""


# -- curve definitions ------------------------------------------------------

def residual(which: Which, y, r, cfg: ModelConfig):
    I, S, L, M = eval_functions((y, r), cfg, check_domain=False)
    return I - S if which is Which.IS else L - M - cfg.m_s


def gradient(which: Which, y, r, cfg: ModelConfig) -> tuple[float, float]:
    p = partials((y, r), cfg)
    if which is Which.IS:
        return float(p["I_Y"] - p["S_Y"]), float(p["I_R"] - p["S_R"])
    return float(p["L_Y"] - p["M_Y"]), float(p["L_R"] - p["M_R"])


def fast_partial(which: Which, y, r, cfg: ModelConfig) -> float:
    """Derivative of the fast equation in its own variable.

    ``d[alpha (I - S)]/dY`` on IS, ``d[beta (L - M - m_s)]/dR`` on LM.
    """
    gy, gr = gradient(which, y, r, cfg)
    return cfg.alpha * gy if which is Which.IS else cfg.beta * gr


# -- continuation -----------------------------------------------------------

def _inside(x, w: GridSpec) -> bool:
    return w.y_min <= x[0] <= w.y_max and w.r_min <= x[1] <= w.r_max


def _find_seed(which: Which, cfg: ModelConfig, w: GridSpec):
    ys, rs = w.axes()
    Y, R = np.meshgrid(ys, rs, indexing="ij")
    F = residual(which, Y, R, cfg)
    mid_r = len(rs) // 2
    order = sorted(range(len(rs)), key=lambda k: (abs(k - mid_r), k))
    for k in order:
        row = F[:, k]
        idx = np.nonzero(row[:-1] * row[1:] < 0)[0]
        if len(idx):
            a = idx[len(idx) // 2]
            r0 = rs[k]
            y0 = brentq(lambda v: float(residual(which, v, r0, cfg)), ys[a], ys[a + 1], xtol=1e-14)
            return np.array([y0, r0])
    for a in range(len(ys)):
        col = F[a, :]
        idx = np.nonzero(col[:-1] * col[1:] < 0)[0]
        if len(idx):
            b = idx[0]
            y0 = ys[a]
            r0 = brentq(lambda v: float(residual(which, y0, v, cfg)), rs[b], rs[b + 1], xtol=1e-14)
            return np.array([y0, r0])
    raise SeedNotFound(f"{which.value} curve does not meet the window")


def _tangent(which, x, cfg, prev=None):
    gy, gr = gradient(which, x[0], x[1], cfg)
    t = np.array([-gr, gy])
    t /= np.hypot(*t)
    if prev is not None and np.dot(t, prev) < 0:
        t = -t
    return t


def _correct(which, xp, t, cfg):
    """Newton on ``F = 0`` with the pseudo-arclength constraint."""
    x = xp.copy()
    for it in range(12):
        f = float(residual(which, x[0], x[1], cfg))
        c = float(np.dot(t, x - xp))
        if abs(f) < CORRECT_TOL and abs(c) < 1e-14:
            return x, it
        gy, gr = gradient(which, x[0], x[1], cfg)
        A = np.array([[gy, gr], [t[0], t[1]]])
        try:
            dx = np.linalg.solve(A, [-f, -c])
        except np.linalg.LinAlgError:
            return None, it
        x = x + dx
        if not np.all(np.isfinite(x)):
            return None, it
    f = float(residual(which, x[0], x[1], cfg))
    return (x, 12) if abs(f) < 1e-10 else (None, 12)


def _clip_to_window(which, x_in, x_out, cfg, w: GridSpec):
    """Point on the curve where the segment x_in -> x_out leaves the window."""
    best = None
    for axis, bound in ((0, w.y_min), (0, w.y_max), (1, w.r_min), (1, w.r_max)):
        a, b = x_in[axis], x_out[axis]
        if (a - bound) * (b - bound) <= 0 and a != b:
            s = (bound - a) / (b - a)
            if 0 <= s <= 1 and (best is None or s < best[0]):
                best = (s, axis, bound)
    if best is None:
        return None
    s, axis, bound = best
    guess = x_in + s * (x_out - x_in)
    other = 1 - axis

    def f(v):
        pt = [0.0, 0.0]
        pt[axis], pt[other] = bound, v
        return float(residual(which, pt[0], pt[1], cfg))

    lo, hi = sorted((x_in[other], x_out[other]))
    span = max(hi - lo, 1e-9)
    lo, hi = lo - span, hi + span
    try:
        v = brentq(f, lo, hi, xtol=1e-14) if f(lo) * f(hi) < 0 else guess[other]
    except ValueError:
        v = guess[other]
    pt = np.zeros(2)
    pt[axis], pt[other] = bound, v
    return pt


def _march(which, cfg, w, x0, t0, max_steps):
    pts = []
    x, t, h = x0.copy(), t0.copy(), STEP_INIT
    for _ in range(max_steps):
        while True:
            xp = x + h * t
            xn, iters = _correct(which, xp, t, cfg)
            if xn is not None:
                tn = _tangent(which, xn, cfg, t)
                ang = math.acos(max(-1.0, min(1.0, float(np.dot(t, tn)))))
                if ang <= ANGLE_MAX or h <= STEP_FLOOR:
                    break
            if h <= STEP_FLOOR:
                return pts
            h = max(h * 0.5, STEP_FLOOR)
        if not _inside(xn, w):
            edge = _clip_to_window(which, x, xn, cfg, w)
            if edge is not None:
                pts.append(edge)
            return pts
        pts.append(xn)
        if len(pts) > 20 and np.hypot(*(xn - x0)) < 0.5 * h:
            return pts  # closed loop
        x, t = xn, tn
        if ang < ANGLE_MAX / 4 and iters <= 3:
            h = min(h * 1.5, STEP_MAX)
    return pts


def trace_isocline(which: Which | str, cfg: ModelConfig, window: GridSpec | None = None,
                   max_steps: int = 200_000) -> IsoclineCurve:
    """Trace the IS or LM zero set inside ``window`` and label its arcs."""
    which = Which(which)
    w = window or default_grid(cfg)
    x0 = _find_seed(which, cfg, w)
    t0 = _tangent(which, x0, cfg)
    fwd = _march(which, cfg, w, x0, t0, max_steps)
    bwd = _march(which, cfg, w, x0, -t0, max_steps)
    pts = np.array(bwd[::-1] + [x0] + fwd)
    fast = pts[:, 0] if which is Which.IS else pts[:, 1]
    if fast[0] > fast[-1]:
        pts = pts[::-1].copy()
    curve = IsoclineCurve(which, pts)
    curve.folds = _locate_folds(curve, cfg)
    return arc_stability(curve, cfg)


def _project(which, a, b, s, cfg):
    """Point on the curve near ``a + s (b - a)``, moved along the chord normal."""
    d = b - a
    n = np.array([-d[1], d[0]]) / np.hypot(*d)
    x0 = a + s * d
    tau = 0.0
    for _ in range(30):
        x = x0 + tau * n
        f = float(residual(which, x[0], x[1], cfg))
        gy, gr = gradient(which, x[0], x[1], cfg)
        df = gy * n[0] + gr * n[1]
        if df == 0:
            break
        step = f / df
        tau -= step
        if abs(step) < 1e-15:
            break
    return x0 + tau * n


def _locate_folds(curve: IsoclineCurve, cfg: ModelConfig) -> list[Fold]:
    which = curve.which
    fp = np.array([fast_partial(which, y, r, cfg) for y, r in curve.points])
    folds = []
    for k in range(len(fp) - 1):
        if fp[k] * fp[k + 1] < 0:
            a, b = curve.points[k], curve.points[k + 1]
            lo, hi, flo = 0.0, 1.0, fp[k]
            while hi - lo > FOLD_TOL:
                mid = 0.5 * (lo + hi)
                x = _project(which, a, b, mid, cfg)
                fm = fast_partial(which, x[0], x[1], cfg)
                if fm * flo > 0:
                    lo, flo = mid, fm
                else:
                    hi = mid
            x = _project(which, a, b, 0.5 * (lo + hi), cfg)
            slow = x[1] if which is Which.IS else x[0]
            folds.append(Fold(float(x[0]), float(x[1]), k, float(slow)))
    return folds


def arc_stability(c: IsoclineCurve, cfg: ModelConfig) -> IsoclineCurve:
    """Split the curve at its folds and label arcs Stable/Unstable.

    Stable where the fast partial is negative. Raises :class:`AmbiguousSign`
    when a sample away from the folds has a vanishing fast partial.
    """
    fp = np.array([fast_partial(c.which, y, r, cfg) for y, r in c.points])
    near_fold = set()
    for f in c.folds:
        near_fold.update((f.index, f.index + 1))
    for k, v in enumerate(fp):
        if abs(v) < SIGN_TOL and k not in near_fold:
            raise AmbiguousSign(f"fast partial vanishes at sample {k} away from folds")
    bounds = [-1] + [f.index for f in c.folds] + [len(fp) - 1]
    arcs = []
    multi = len(c.folds) > 0
    for j in range(len(bounds) - 1):
        start, stop = bounds[j] + 1, bounds[j + 1]
        if stop < start:
            continue
        seg = fp[start:stop + 1]
        stability = "Stable" if np.median(seg) < 0 else "Unstable"
        label = f"A{j + 1}" if multi else "Monotone"
        arcs.append(Arc(start, stop, label, stability))
    return replace(c, arcs=arcs)


def fold_values(c: IsoclineCurve) -> FoldPair:
    """Slow-variable levels at the two folds: (R1, R2) on IS, (Y1, Y2) on LM."""
    if len(c.folds) != 2:
        raise FoldCountMismatch(f"expected 2 folds, found {len(c.folds)}")
    a, b = sorted(f.slow for f in c.folds)
    return FoldPair(a, b)


def fold_points(c: IsoclineCurve) -> tuple[Fold, Fold]:
    """The two folds ordered by the fast coordinate (A1|A2 boundary first)."""
    if len(c.folds) != 2:
        raise FoldCountMismatch(f"expected 2 folds, found {len(c.folds)}")
    key = (lambda f: f.y) if c.which is Which.IS else (lambda f: f.r)
    f1, f2 = sorted(c.folds, key=key)
    return f1, f2


def i_s_column(c: IsoclineCurve, cfg: ModelConfig) -> np.ndarray:
    return short_rate(c.r, cfg)
