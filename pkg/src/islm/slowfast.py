"""Slow-fast integration, relaxation-cycle detection and the singular orbit.

Orientation convention: the signed (shoelace) area is taken with the slow
variable on the horizontal axis and the fast variable on the vertical one,
i.e. (R, Y) for the goods market and (Y, R) for the money market. Negative
area means clockwise.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from islm.econ_model import FastSide, GridSpec, ModelConfig, Regime, State, default_grid
from islm.errors import (
    DomainExit,
    FoldCountMismatch,
    NoCycle,
    NonConvergent,
    NoReturnDrift,
    StepFloorReached,
)
from islm.isocline import IsoclineCurve, Which, fold_points, residual, trace_isocline
from islm.phase_plane import find_equilibria, speeds

# Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes c_i
# are not needed.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


@dataclass(frozen=True)
class StepControl:
    """Tolerances and step bounds for the Dormand-Prince integrator.

    The finite ``h_max`` keeps the explicit method off its stability edge
    during long slow drifts; without it the controller oscillates there and
    a state resting on an attractor wobbles at the tolerance level.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    h_init: float = 1e-3
    h_min: float = 1e-10
    h_max: float = 2.0
    max_steps: int = 5_000_000


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    r: np.ndarray
    dy: np.ndarray
    dr: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    status: str = "ok"
    jump_marks: list[tuple[int, int]] = field(default_factory=list)

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.y, self.r])


def make_rhs(cfg: ModelConfig) -> Callable[[float, float], tuple[float, float]]:
    """Scalar right-hand side built from plain floats for the integrator loop."""
    inv, sav, dem, sup = cfg.invest, cfg.save, cfg.demand, cfg.supply
    ky, kr = speeds(cfg)
    i0, a, b, ym, h, ls = inv.i0, inv.a, inv.b, inv.ym, inv.h, inv.linear_slope
    s0, s, g = sav.s0, sav.s, sav.g
    l, d, kl, p, q = dem.l, dem.d, dem.kappa_l, dem.p, dem.q
    m, e, km = sup.m, sup.e, sup.kappa_m
    shift = -cfg.mp + cfg.pi_e
    m_s = cfg.m_s
    hpq, pq = 0.5 * (p + q), p * q
    tanh = math.tanh

    def rhs(y: float, r: float) -> tuple[float, float]:
        i = r + shift
        cub = i * i * i / 3.0 - hpq * i * i + pq * i
        gap = i0 + a * tanh(b * (y - ym)) + ls * y - h * r - s0 - s * y - g * r
        money = l * y - d * i - kl * cub - m * y - e * i - km * cub - m_s
        return ky * gap, kr * money

    return rhs


def _dopri(rhs, t0: float, y0: float, r0: float, t_end: float,
           ctrl: StepControl) -> Iterator[tuple[float, float, float, float, float]]:
    """Yield ``(t, y, r, dy, dr)`` at the start and after every accepted step.

    The generator's ``n_rejected`` is reported through StopIteration.value.
    """
    t, y, r = t0, y0, r0
    ky, kr = rhs(y, r)
    yield t, y, r, ky, kr
    h = min(ctrl.h_init, ctrl.h_max, t_end - t0) if t_end > t0 else 0.0
    rejected = 0
    steps = 0
    atol, rtol = ctrl.abs_tol, ctrl.rel_tol
    a2, a3, a4, a5, a6 = _A[1:]
    b1, _, b3, b4, b5, b6 = _B
    e1, _, e3, e4, e5, e6, e7 = _E
    while t < t_end:
        if steps >= ctrl.max_steps:
            raise StepFloorReached(f"step budget {ctrl.max_steps} exhausted at t={t}")
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        y1, r1 = ky, kr
        y2, r2 = rhs(y + h * a2[0] * y1, r + h * a2[0] * r1)
        y3, r3 = rhs(y + h * (a3[0] * y1 + a3[1] * y2), r + h * (a3[0] * r1 + a3[1] * r2))
        y4, r4 = rhs(y + h * (a4[0] * y1 + a4[1] * y2 + a4[2] * y3),
                     r + h * (a4[0] * r1 + a4[1] * r2 + a4[2] * r3))
        y5, r5 = rhs(y + h * (a5[0] * y1 + a5[1] * y2 + a5[2] * y3 + a5[3] * y4),
                     r + h * (a5[0] * r1 + a5[1] * r2 + a5[2] * r3 + a5[3] * r4))
        y6, r6 = rhs(y + h * (a6[0] * y1 + a6[1] * y2 + a6[2] * y3 + a6[3] * y4 + a6[4] * y5),
                     r + h * (a6[0] * r1 + a6[1] * r2 + a6[2] * r3 + a6[3] * r4 + a6[4] * r5))
        yn = y + h * (b1 * y1 + b3 * y3 + b4 * y4 + b5 * y5 + b6 * y6)
        rn = r + h * (b1 * r1 + b3 * r3 + b4 * r4 + b5 * r5 + b6 * r6)
        y7, r7 = rhs(yn, rn)
        ey = h * (e1 * y1 + e3 * y3 + e4 * y4 + e5 * y5 + e6 * y6 + e7 * y7)
        er = h * (e1 * r1 + e3 * r3 + e4 * r4 + e5 * r5 + e6 * r6 + e7 * r7)
        sy = atol + rtol * max(abs(y), abs(yn))
        sr = atol + rtol * max(abs(r), abs(rn))
        err = max(abs(ey) / sy, abs(er) / sr)
        if not math.isfinite(err):
            err = 1e10
        if err <= 1.0:
            t = t_end if last else t + h
            y, r, ky, kr = yn, rn, y7, r7
            steps += 1
            yield t, y, r, ky, kr
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            rejected += 1
            fac = max(0.1, 0.9 * err ** -0.2)
        h = min(h * fac, ctrl.h_max)
        if h < ctrl.h_min and t < t_end:
            raise StepFloorReached(f"step size {h:g} below floor at t={t}")
    return rejected


def _run(rhs, s0: State, t_end: float, ctrl: StepControl) -> Trajectory:
    ts, ys, rs, dys, drs = [], [], [], [], []
    gen = _dopri(rhs, 0.0, s0.y, s0.r, t_end, ctrl)
    rejected = 0
    status = "ok"
    try:
        while True:
            t, y, r, dy, dr = next(gen)
            if y < 0:
                status = "domain_exit"
                break
            ts.append(t)
            ys.append(y)
            rs.append(r)
            dys.append(dy)
            drs.append(dr)
    except StopIteration as stop:
        rejected = stop.value or 0
    traj = Trajectory(np.array(ts), np.array(ys), np.array(rs), np.array(dys), np.array(drs),
                      n_accepted=len(ts) - 1, n_rejected=rejected, status=status)
    if status == "domain_exit":
        raise DomainExit(f"Y < 0 reached at t={t:g}", traj)
    return traj


def integrate(s0: State, cfg: ModelConfig, t_end: float,
              ctrl: StepControl | None = None) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of the full system.

    Halts with :class:`DomainExit` when Y becomes negative.
    """
    if not cfg.epsilon > 0:
        raise ValueError("integrate needs epsilon > 0")
    tr = _run(make_rhs(cfg), s0, t_end, ctrl or StepControl())
    if len(tr.t) > 2:
        tr.jump_marks = runs(jump_mask(tr.dy, tr.dr, cfg))
    return tr


def integrate_fast_subsystem(s0: State, cfg: ModelConfig, t_end: float,
                             ctrl: StepControl | None = None) -> Trajectory:
    """Integrate the frozen system: the slow variable is held constant."""
    return _run(make_rhs(cfg.with_epsilon(0.0)), s0, t_end, ctrl or StepControl())


# -- geometry helpers --------------------------------------------------------

def fast_curve(cfg: ModelConfig) -> Which:
    return Which.IS if cfg.fast_side is FastSide.GOODS else Which.LM


def to_slow_fast(points: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Columns (slow, fast) from columns (y, r)."""
    if cfg.fast_side is FastSide.GOODS:
        return points[:, ::-1]
    return points


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def orientation(points_yr: np.ndarray, cfg: ModelConfig) -> str:
    area = signed_area(to_slow_fast(points_yr, cfg))
    return "Clockwise" if area < 0 else "Counterclockwise"


def _resample(poly: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.diff(poly, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    out = [poly[:1]]
    for k, n in enumerate(np.ceil(lengths / spacing).astype(int)):
        if n <= 0:
            continue
        s = np.arange(1, n + 1)[:, None] / n
        out.append(poly[k] + s * seg[k])
    return np.vstack(out)


def hausdorff(a: np.ndarray, b: np.ndarray, spacing: float = 1e-4) -> float:
    """Symmetric Hausdorff distance between two polylines (densified)."""
    da, db = _resample(a, spacing), _resample(b, spacing)
    d1 = cKDTree(db).query(da)[0].max()
    d2 = cKDTree(da).query(db)[0].max()
    return float(max(d1, d2))


# -- singular orbit ------------------------------------------------------------

@dataclass
class SingularOrbit:
    arc_a1: np.ndarray  # from landing point C to fold B
    jump_1: np.ndarray  # B -> C'
    arc_a3: np.ndarray  # from C' to fold B'
    jump_2: np.ndarray  # B' -> C
    curve: IsoclineCurve

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.arc_a1, self.arc_a3, self.arc_a1[:1]])

    def orientation(self, cfg: ModelConfig) -> str:
        return orientation(self.points[:-1], cfg)


def _slow_rate(cfg: ModelConfig, pts: np.ndarray) -> np.ndarray:
    rhs = make_rhs(cfg)
    k = 1 if cfg.fast_side is FastSide.GOODS else 0
    return np.array([rhs(y, r)[k] for y, r in pts])


def _landing(curve: IsoclineCurve, arc, slow_value: float, cfg: ModelConfig):
    """Point on ``arc`` whose slow coordinate equals ``slow_value``."""
    pts = curve.points[arc.start:arc.stop + 1]
    slow = pts[:, 1] if curve.which is Which.IS else pts[:, 0]
    d = slow - slow_value
    idx = np.nonzero(d[:-1] * d[1:] <= 0)[0]
    if not len(idx):
        raise NoReturnDrift(f"arc {arc.label} never reaches slow level {slow_value:.6g} "
                            "inside the tracing window")
    k = int(idx[0])
    fa, fb = (pts[k, 0], pts[k + 1, 0]) if curve.which is Which.IS else (pts[k, 1], pts[k + 1, 1])

    def f(v):
        return float(residual(curve.which, v, slow_value, cfg) if curve.which is Which.IS
                     else residual(curve.which, slow_value, v, cfg))

    lo, hi = min(fa, fb), max(fa, fb)
    if f(lo) * f(hi) > 0:
        v = fa
    else:
        v = brentq(f, lo, hi, xtol=1e-15) if lo < hi else lo
    pt = np.array([v, slow_value]) if curve.which is Which.IS else np.array([slow_value, v])
    return arc.start + k, pt


def singular_orbit(cfg: ModelConfig, window: GridSpec | None = None,
                   curve: IsoclineCurve | None = None) -> SingularOrbit:
    """Closed loop of two stable arcs and two jumps at the fold levels.

    Raises :class:`FoldCountMismatch` without two folds and
    :class:`NoReturnDrift` when the slow flow on the stable arcs does not
    carry the state towards the folds.
    """
    curve = curve or trace_isocline(fast_curve(cfg), cfg, window)
    b1, b2 = fold_points(curve)  # b1 ends A1, b2 starts A3
    a1, a3 = curve.arcs[0], curve.arcs[-1]
    slow_all = _slow_rate(cfg, curve.points)
    if np.all(slow_all > 0) or np.all(slow_all < 0):
        raise NoReturnDrift("slow flow keeps one sign along the whole curve")
    pb1 = np.array([b1.y, b1.r])
    pb2 = np.array([b2.y, b2.r])
    kc, pc = _landing(curve, a1, b2.slow, cfg)  # C on A1 at level of B'
    kc3, pc3 = _landing(curve, a3, b1.slow, cfg)  # C' on A3 at level of B

    seg1 = np.vstack([pc, curve.points[kc + 1:a1.stop + 1], pb1])
    # A3 runs from B' (its start) outwards; walk it from C' back to B'.
    seg3 = np.vstack([pc3, curve.points[a3.start:kc3 + 1][::-1], pb2])

    for seg, target in ((seg1, b1.slow), (seg3, b2.slow)):
        rate = _slow_rate(cfg, seg[:-1])
        want = np.sign(target - (seg[0, 1] if curve.which is Which.IS else seg[0, 0]))
        if want == 0 or np.any(np.sign(rate) != want):
            raise NoReturnDrift("slow drift on a stable arc does not lead to its fold")
    return SingularOrbit(seg1, np.vstack([pb1, pc3]), seg3, np.vstack([pb2, pc]), curve)


def singular_period(orbit: SingularOrbit, cfg: ModelConfig) -> float:
    """Time spent on the two stable arcs in the singular limit."""
    total = 0.0
    k = 1 if orbit.curve.which is Which.IS else 0
    for seg in (orbit.arc_a1, orbit.arc_a3):
        rate = np.abs(_slow_rate(cfg, seg))
        slow = seg[:, k]
        total += float(np.sum(0.5 * (1 / rate[:-1] + 1 / rate[1:]) * np.abs(np.diff(slow))))
    return total


# -- cycle detection --------------------------------------------------------------

@dataclass(frozen=True)
class CycleControl:
    step: StepControl = StepControl()
    t_end: float | None = None
    burn_fraction: float = 0.2
    max_returns: int = 50
    closure_tol: float = 1e-6
    jump_speed_factor: float = 10.0
    window: GridSpec | None = None


@dataclass
class CycleReport:
    cycle_samples: np.ndarray  # (n, 2) y, r; first and last are section returns
    times: np.ndarray
    period: float
    orientation: str
    jumps: list[tuple[State, State]]
    jump_indices: list[tuple[int, int]]
    y_range: tuple[float, float]
    r_range: tuple[float, float]
    poincare_residual: float
    signed_area: float
    n_returns: int
    section: tuple[str, float]

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "orientation": self.orientation,
            "signed_area_slow_fast": self.signed_area,
            "jumps": [{"from": [a.y, a.r], "to": [b.y, b.r]} for a, b in self.jumps],
            "y_range": list(self.y_range),
            "r_range": list(self.r_range),
            "poincare_residual": self.poincare_residual,
            "n_returns": self.n_returns,
            "section": {"variable": self.section[0], "value": self.section[1]},
            "n_samples": int(len(self.cycle_samples)),
        }


def jump_mask(dy: np.ndarray, dr: np.ndarray, cfg: ModelConfig, factor: float = 10.0) -> np.ndarray:
    """Samples where the fast speed exceeds ``factor`` times the median slow speed."""
    fast, slow = (dy, dr) if cfg.fast_side is FastSide.GOODS else (dr, dy)
    thresh = factor * float(np.median(np.abs(slow)))
    return np.abs(fast) > thresh


def runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive index pairs."""
    out = []
    start = None
    for k, v in enumerate(mask):
        if v and start is None:
            start = k
        elif not v and start is not None:
            out.append((start, k - 1))
            start = None
    if start is not None:
        out.append((start, len(mask) - 1))
    return out


def _hermite(t0, x0, f0, t1, x1, f1, tau):
    h = t1 - t0
    s = tau
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1


def _check_pairing(cfg: ModelConfig):
    ok = ((cfg.fast_side is FastSide.GOODS and cfg.regime is Regime.KALDOR_GOODS)
          or (cfg.fast_side is FastSide.MONEY and cfg.regime is Regime.THREE_PHASE_MONEY))
    if not ok:
        raise ValueError("cycle detection needs Goods+KaldorGoods or Money+ThreePhaseMoney")


def detect_cycle(cfg: ModelConfig, s0: State | None = None,
                 ctrl: CycleControl | None = None) -> CycleReport:
    """Integrate past the transient and close a relaxation cycle on a section.

    The section is the line ``slow = (fold_low + fold_high) / 2`` restricted to
    the A1 side of the folded isocline, crossed in the direction of the slow
    drift there. A cycle is declared when two consecutive returns after the
    burn-in agree within ``closure_tol``.
    """
    _check_pairing(cfg)
    ctrl = ctrl or CycleControl()
    if not cfg.epsilon > 0:
        raise ValueError("detect_cycle needs epsilon > 0")
    window = ctrl.window or default_grid(cfg)
    curve = trace_isocline(fast_curve(cfg), cfg, window)
    if len(curve.folds) != 2:
        raise FoldCountMismatch(f"expected 2 folds, found {len(curve.folds)}")
    b1, b2 = fold_points(curve)
    goods = curve.which is Which.IS
    s_mid = 0.5 * (b1.slow + b2.slow)
    _, sec_pt = _landing(curve, curve.arcs[0], s_mid, cfg)
    rhs = make_rhs(cfg)
    si, fi = (1, 0) if goods else (0, 1)
    fast_limit = b1.y if goods else b1.r
    drift = math.copysign(1.0, rhs(*sec_pt)[si]) if rhs(*sec_pt)[si] != 0 else 0.0
    if drift == 0.0:
        raise NoCycle("the section point is stationary")

    t_end = ctrl.t_end
    if t_end is None:
        try:
            t_end = 10.0 * singular_period(singular_orbit(cfg, window, curve), cfg)
        except NoReturnDrift:
            rates = np.abs(_slow_rate(cfg, curve.points))
            t_end = 20.0 * abs(b2.slow - b1.slow) / max(float(np.median(rates)), 1e-300)
    t_burn = ctrl.burn_fraction * t_end
    start = s0 or State(float(sec_pt[0]), float(sec_pt[1]))

    gen = _dopri(rhs, 0.0, start.y, start.r, t_end, ctrl.step)
    prev = next(gen)
    buf = [prev]
    returns: list[tuple[float, np.ndarray, int]] = []
    cycle = None
    last_t = prev[0]
    try:
        for cur in gen:
            if cur[1] < 0:
                raise DomainExit(f"Y < 0 reached at t={cur[0]:g}")
            last_t = cur[0]
            a, b = prev[1 + si] - s_mid, cur[1 + si] - s_mid
            if a * b <= 0 and (cur[1 + si] - prev[1 + si]) * drift > 0 and b != 0:
                ta, tb = prev[0], cur[0]
                xa = np.array(prev[1:3])
                xb = np.array(cur[1:3])
                fa = np.array(prev[3:5])
                fb = np.array(cur[3:5])

                def g(tau):
                    return _hermite(ta, xa, fa, tb, xb, fb, tau)[si] - s_mid

                tau = brentq(g, 0.0, 1.0, xtol=1e-15) if g(0.0) * g(1.0) < 0 else 0.0
                pt = _hermite(ta, xa, fa, tb, xb, fb, tau)
                pt[si] = s_mid
                tc = ta + tau * (tb - ta)
                if pt[fi] < fast_limit and tc > 0.0:
                    if tc >= t_burn:
                        returns.append((tc, pt, len(buf)))
                        if len(returns) >= 2:
                            gap = float(np.hypot(*(returns[-1][1] - returns[-2][1])))
                            if gap < ctrl.closure_tol:
                                cycle = (returns[-2], returns[-1], buf, gap)
                                break
                        if len(returns) > ctrl.max_returns:
                            raise NonConvergent(
                                f"{len(returns)} section returns without settling")
                        buf = [cur]
                    else:
                        buf = [cur]
                    prev = cur
                    continue
            buf.append(cur)
            prev = cur
            if abs(cur[3]) + abs(cur[4]) < 1e-14:
                break
    except StopIteration:
        pass

    if cycle is None:
        if not returns:
            _raise_capture(cfg, window, np.array(prev[1:3]))
        raise NonConvergent(f"returns did not settle by t={last_t:g}")

    (t_a, p_a, _), (t_b, p_b, _), buf, gap = cycle
    steps = buf[:-1] if len(buf) > 1 else []
    samples = [p_a] + [np.array(s[1:3]) for s in steps] + [p_b]
    times = [t_a] + [s[0] for s in steps] + [t_b]
    pts = np.array(samples)
    times = np.array(times)
    derivs = np.array([rhs(y, r) for y, r in pts])
    mask = jump_mask(derivs[:, 0], derivs[:, 1], cfg, ctrl.jump_speed_factor)
    jr = runs(mask)
    jumps = [(State(*pts[i]), State(*pts[j])) for i, j in jr]
    area = signed_area(to_slow_fast(pts[:-1], cfg))
    return CycleReport(
        cycle_samples=pts,
        times=times,
        period=float(t_b - t_a),
        orientation="Clockwise" if area < 0 else "Counterclockwise",
        jumps=jumps,
        jump_indices=jr,
        y_range=(float(pts[:, 0].min()), float(pts[:, 0].max())),
        r_range=(float(pts[:, 1].min()), float(pts[:, 1].max())),
        poincare_residual=gap,
        signed_area=area,
        n_returns=len(returns),
        section=("R" if goods else "Y", float(s_mid)),
    )


def _raise_capture(cfg: ModelConfig, window: GridSpec, end: np.ndarray):
    try:
        eqs = find_equilibria(cfg, window)
    except Exception:
        eqs = []
    for e in eqs:
        if e.kind.is_attractor and math.hypot(e.state.y - end[0], e.state.r - end[1]) < 1e-2:
            raise NoCycle(f"trajectory captured by the attractor at "
                          f"(Y={e.state.y:.6g}, R={e.state.r:.6g})")
    raise NoCycle("no section returns; the orbit does not circulate")


# -- singular limit -------------------------------------------------------------

def max_workers() -> int:
    env = os.environ.get("ISLM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _eps_distance(args):
    cfg, eps, ctrl = args
    cyc = detect_cycle(cfg.with_epsilon(eps), ctrl=ctrl)
    orbit = singular_orbit(cfg, ctrl.window)
    return eps, hausdorff(cyc.cycle_samples, orbit.points)


def epsilon_convergence(cfg: ModelConfig, eps_list: Sequence[float],
                        ctrl: CycleControl | None = None) -> list[tuple[float, float]]:
    """Hausdorff distance from the detected cycle to the singular orbit, per epsilon."""
    ctrl = ctrl or CycleControl()
    jobs = [(cfg, float(e), ctrl) for e in eps_list]
    workers = min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_eps_distance, jobs))
    return [_eps_distance(j) for j in jobs]
