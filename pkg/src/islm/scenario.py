"""Policy-shift experiments: parameter sweeps, saddle-node folds, hysteresis.

Three parameters can be moved:

* ``MonetaryMS`` replaces the exogenous money stock ``m_s`` (moves LM).
* ``FiscalShift`` adds to the investment intercept ``i0`` (moves IS).
* ``Slow`` freezes the slow variable of the fast subsystem at the given
  value (R for the goods market, Y for the money market). This is the
  parameter in which the fold levels of the folded isocline are measured.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from islm.econ_model import (
    FastSide,
    GridSpec,
    ModelConfig,
    State,
    default_grid,
    eval_functions,
    partials,
    verify_conditions,
)
from islm.errors import ConditionBroken, NoEquilibrium, NoHysteresis
from islm.isocline import Which, fast_partial, residual
from islm.phase_plane import Equilibrium, Kind, find_equilibria, jacobian, make_equilibrium
from islm.slowfast import StepControl, integrate, integrate_fast_subsystem, make_rhs

FOLD_PARAM_TOL = 1e-9
SETTLE_STEP = StepControl(h_max=1.0)
DET_TOL = 1e-8


class Parameter(str, enum.Enum):
    MONETARY_MS = "MonetaryMS"
    FISCAL_SHIFT = "FiscalShift"
    SLOW = "Slow"


def apply_shift(cfg: ModelConfig, parameter: Parameter | str, value: float,
                verify: bool = True) -> ModelConfig:
    """Shifted copy of ``cfg``; re-verifies the regime conditions by default."""
    parameter = Parameter(parameter)
    if parameter is Parameter.MONETARY_MS:
        if not value > 0:
            raise ValueError(f"m_s must be positive, got {value}")
        out = dataclasses.replace(cfg, m_s=float(value))
    elif parameter is Parameter.FISCAL_SHIFT:
        inv = dataclasses.replace(cfg.invest, i0=cfg.invest.i0 + float(value))
        out = dataclasses.replace(cfg, invest=inv)
    else:
        raise ValueError("the Slow parameter does not define a shifted configuration")
    if verify:
        report = verify_conditions(out)
        if not report.passed:
            raise ConditionBroken(
                f"{parameter.value}={value} breaks {', '.join(report.violated_conditions())}",
                report)
    return out


@dataclass(frozen=True)
class SweepSpec:
    parameter: Parameter
    values: tuple[float, ...]
    base: ModelConfig
    window: GridSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "parameter", Parameter(self.parameter))
        if self.parameter is Parameter.SLOW:
            raise ValueError("sweeps take MonetaryMS or FiscalShift")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ValueError("a sweep needs at least two values")
        d = np.diff(vals)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep values must be strictly monotone")


@dataclass(frozen=True)
class FoldEvent:
    parameter_value: float
    state: State
    det: float
    eigs: tuple[complex, complex]
    merging_kinds: tuple[str, str]
    counts: tuple[int, int]  # equilibrium count just below / above the fold value


@dataclass
class BranchDiagram:
    parameter: Parameter
    values: list[float]
    equilibria: list[list[Equilibrium]]
    folds: list[FoldEvent] = field(default_factory=list)

    @property
    def counts(self) -> list[int]:
        return [len(e) for e in self.equilibria]

    def rows(self):
        """``(parameter_value, eq_index, y, r, kind)`` in sweep order."""
        for v, eqs in zip(self.values, self.equilibria):
            for k, e in enumerate(eqs):
                yield v, k, e.state.y, e.state.r, e.kind.value

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter.value,
            "counts": self.counts,
            "folds": [
                {
                    "parameter_value": f.parameter_value,
                    "y": f.state.y,
                    "r": f.state.r,
                    "det": f.det,
                    "eig_abs": [abs(f.eigs[0]), abs(f.eigs[1])],
                    "merging_kinds": list(f.merging_kinds),
                    "counts": list(f.counts),
                }
                for f in self.folds
            ],
        }


def _solve(cfg: ModelConfig, window: GridSpec, seeds=()) -> list[Equilibrium]:
    try:
        return find_equilibria(cfg, window, seeds)
    except NoEquilibrium:
        return []


def _raw3(x: np.ndarray, base: ModelConfig, parameter: Parameter) -> np.ndarray:
    y, r, mu = x
    cfg = apply_shift(base, parameter, mu, verify=False)
    I, S, L, M = eval_functions((y, r), cfg, check_domain=False)
    p = partials((y, r), cfg)
    det = ((p["I_Y"] - p["S_Y"]) * (p["L_R"] - p["M_R"])
           - (p["I_R"] - p["S_R"]) * (p["L_Y"] - p["M_Y"]))
    return np.array([float(I - S), float(L - M - cfg.m_s), float(det)])


def _augmented_newton(x0: np.ndarray, base: ModelConfig, parameter: Parameter,
                      tol: float = 1e-13, max_iter: int = 30) -> np.ndarray | None:
    """Newton on (y, r, mu) for goods = money = det = 0 (finite-difference Jacobian)."""
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        f = _raw3(x, base, parameter)
        if np.max(np.abs(f)) < tol:
            return x
        jac = np.empty((3, 3))
        for k in range(3):
            h = 1e-7 * max(1.0, abs(x[k]))
            e = np.zeros(3)
            e[k] = h
            jac[:, k] = (_raw3(x + e, base, parameter) - _raw3(x - e, base, parameter)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        x = x + step
        if not np.all(np.isfinite(x)):
            return None
    return x if np.max(np.abs(_raw3(x, base, parameter))) < 1e-10 else None


def _nearest_pair(eqs: list[Equilibrium]) -> tuple[Equilibrium, Equilibrium]:
    best = None
    for a, b in zip(eqs[:-1], eqs[1:]):
        d = math.hypot(a.state.y - b.state.y, a.state.r - b.state.r)
        if best is None or d < best[0]:
            best = (d, a, b)
    return best[1], best[2]


def _refine_fold(spec: SweepSpec, lo: float, hi: float, n_lo: int, n_hi: int,
                 window: GridSpec, seeds, rich_eqs: list[Equilibrium]) -> FoldEvent:
    """Bisect on the count change between ``lo`` and ``hi``, then polish.

    The merging kinds are read off the nearest pair at the sweep value with
    more equilibria, where the two are still far enough apart to classify.
    """
    base, par = spec.base, spec.parameter
    rich = None
    a, b = lo, hi
    while abs(b - a) > FOLD_PARAM_TOL * max(1.0, abs(a)):
        mid = 0.5 * (a + b)
        eqs = _solve(apply_shift(base, par, mid, verify=False), window, seeds)
        if len(eqs) == n_lo:
            a = mid
        else:
            b = mid
        if len(eqs) == max(n_lo, n_hi):
            rich = (mid, eqs)
    if rich is None:
        side = a if n_lo > n_hi else b
        rich = (side, _solve(apply_shift(base, par, side, verify=False), window, seeds))
    mu, eqs = rich
    e1, e2 = _nearest_pair(eqs)
    g1, g2 = _nearest_pair(rich_eqs)
    kinds = tuple(sorted((g1.kind.value, g2.kind.value)))
    x0 = np.array([0.5 * (e1.state.y + e2.state.y), 0.5 * (e1.state.r + e2.state.r), mu])
    x = _augmented_newton(x0, base, par)
    if x is None or abs(x[2] - mu) > 1e-3 * max(1.0, abs(hi - lo)) + abs(hi - lo):
        x = x0
    cfg = apply_shift(base, par, float(x[2]), verify=False)
    deg = make_equilibrium(float(x[0]), float(x[1]), cfg)
    return FoldEvent(float(x[2]), deg.state, deg.jac.det, deg.eigs, kinds, (n_lo, n_hi))


def sweep(spec: SweepSpec) -> BranchDiagram:
    """Equilibria at every sweep value plus refined fold parameter values."""
    report = verify_conditions(spec.base)
    if not report.passed:
        raise ConditionBroken("base configuration fails: "
                              + ", ".join(report.violated_conditions()), report)
    window = spec.window or default_grid(spec.base)
    all_eqs: list[list[Equilibrium]] = []
    seeds: list[tuple[float, float]] = []
    for v in spec.values:
        cfg = apply_shift(spec.base, spec.parameter, v)
        eqs = _solve(cfg, window, seeds)
        all_eqs.append(eqs)
        seeds = [(e.state.y, e.state.r) for e in eqs]
    diagram = BranchDiagram(spec.parameter, list(spec.values), all_eqs)
    for k in range(len(spec.values) - 1):
        n0, n1 = len(all_eqs[k]), len(all_eqs[k + 1])
        if n0 != n1 and min(n0, n1) > 0:
            seeds = [(e.state.y, e.state.r) for e in all_eqs[k] + all_eqs[k + 1]]
            rich = all_eqs[k] if n0 > n1 else all_eqs[k + 1]
            diagram.folds.append(_refine_fold(spec, spec.values[k], spec.values[k + 1],
                                              n0, n1, window, seeds, rich))
    return diagram


# -- hysteresis -------------------------------------------------------------------

@dataclass
class HysteresisResult:
    parameter: Parameter
    path: list[float]
    settled: list[State]
    up_jump: float
    down_jump: float
    up_index: int
    down_index: int
    unsettled: list[int] = field(default_factory=list)

    @property
    def width(self) -> float:
        return abs(self.up_jump - self.down_jump)

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter.value,
            "up_jump": self.up_jump,
            "down_jump": self.down_jump,
            "width": self.width,
            "path": self.path,
            "unsettled_indices": self.unsettled,
            "settled": [[s.y, s.r] for s in self.settled],
        }


def _fast_which(cfg: ModelConfig) -> Which:
    return Which.IS if cfg.fast_side is FastSide.GOODS else Which.LM


def _with_slow(state: State, value: float, cfg: ModelConfig) -> State:
    if cfg.fast_side is FastSide.GOODS:
        return State(state.y, value)
    return State(max(value, 0.0), state.r)


def _settle_distance(st: State, cfg: ModelConfig, reduced: bool) -> float:
    """Newton-step estimate of the distance to the nearest equilibrium."""
    if reduced:
        which = _fast_which(cfg)
        f = float(residual(which, st.y, st.r, cfg))
        d = float(fast_partial(which, st.y, st.r, cfg))
        speed = cfg.alpha if which is Which.IS else cfg.beta
        return abs(speed * f / d) if d != 0 else math.inf
    rhs = make_rhs(cfg)
    f = np.array(rhs(st.y, st.r))
    try:
        return float(np.max(np.abs(np.linalg.solve(jacobian(st, cfg).as_array(), f))))
    except np.linalg.LinAlgError:
        return math.inf


def settle(st: State, cfg: ModelConfig, reduced: bool, tol: float = 1e-8,
           t_cap: float = 1e5, ctrl: StepControl | None = None) -> tuple[State, bool]:
    """Integrate until within ``tol`` of an equilibrium or until ``t_cap`` elapses.

    Returns the final state and whether it settled. Exactly at a fold the
    approach is algebraic rather than exponential, so the cap can bind.
    """
    run = integrate_fast_subsystem if reduced else integrate
    # Without a step cap the controller rides the explicit stability limit
    # near the attractor and the state wobbles at the 1e-8 level.
    ctrl = ctrl or SETTLE_STEP
    elapsed, chunk = 0.0, 10.0
    while _settle_distance(st, cfg, reduced) >= tol:
        if elapsed >= t_cap:
            return st, False
        dt = min(chunk, t_cap - elapsed)
        tr = run(st, cfg, dt, ctrl)
        st = State(float(tr.y[-1]), float(tr.r[-1]))
        elapsed += dt
        chunk *= 2.0
    return st, True


def _initial_state(cfg: ModelConfig, parameter: Parameter, value: float,
                   window: GridSpec) -> State:
    if parameter is Parameter.SLOW:
        which = _fast_which(cfg)
        ys, rs = window.axes()
        fast = ys if which is Which.IS else rs
        if which is Which.IS:
            f = residual(which, fast, np.full_like(fast, value), cfg)
        else:
            f = residual(which, np.full_like(fast, value), fast, cfg)
        k = np.nonzero(np.diff(np.sign(f)))[0]
        if not len(k):
            raise NoHysteresis(f"no fast equilibrium at slow value {value}")
        pick = float(fast[k[0]])
        return State(pick, value) if which is Which.IS else State(value, pick)
    eqs = [e for e in _solve(apply_shift(cfg, parameter, value), window)
           if e.kind.is_attractor]
    if not eqs:
        raise NoHysteresis(f"no attractor at {parameter.value}={value}")
    return eqs[0].state


def hysteresis_run(cfg: ModelConfig, parameter: Parameter | str, path: Sequence[float],
                   window: GridSpec | None = None, jump_threshold: float | None = None,
                   tol: float = 1e-8, t_cap: float = 1e5) -> HysteresisResult:
    """Quasi-static tracking of an attractor along an up-then-down parameter path.

    The parameter advances only after the state has settled. A jump is a
    displacement between consecutive settled states larger than
    ``jump_threshold`` (default: a tenth of the window diagonal).
    """
    parameter = Parameter(parameter)
    window = window or default_grid(cfg)
    path = [float(v) for v in path]
    if len(path) < 3:
        raise ValueError("path needs at least three values")
    turn = int(np.argmax(path))
    up, down = path[:turn + 1], path[turn:]
    if np.any(np.diff(up) <= 0) or np.any(np.diff(down) >= 0) or len(down) < 2:
        raise ValueError("path must rise strictly and then fall strictly")
    if jump_threshold is None:
        jump_threshold = 0.1 * math.hypot(window.y_max - window.y_min,
                                          window.r_max - window.r_min)
    reduced = parameter is Parameter.SLOW
    run_cfg = cfg.with_epsilon(0.0) if reduced else cfg

    st = _initial_state(cfg, parameter, path[0], window)
    settled: list[State] = []
    unsettled: list[int] = []
    jumps: list[int] = []
    for k, v in enumerate(path):
        if reduced:
            cur_cfg = run_cfg
            st = _with_slow(st, v, cfg)
        else:
            cur_cfg = apply_shift(cfg, parameter, v)
        st, ok = settle(st, cur_cfg, reduced, tol, t_cap)
        if not ok:
            unsettled.append(k)
        if settled and math.hypot(st.y - settled[-1].y, st.r - settled[-1].r) > jump_threshold:
            jumps.append(k)
        settled.append(st)

    up_jumps = [k for k in jumps if k <= turn]
    down_jumps = [k for k in jumps if k > turn]
    if not up_jumps or not down_jumps:
        raise NoHysteresis("the tracked attractor never changed branch on both legs")
    ku, kd = up_jumps[0], down_jumps[0]
    if path[ku] == path[kd]:
        raise NoHysteresis("up and down jumps coincide")
    return HysteresisResult(parameter, path, settled, path[ku], path[kd], ku, kd, unsettled)
