"""Economic function families, the short-rate mapping and the condition verifier.

The model works in the (Y, R) plane: aggregate income and the long-term real
rate. The money market sees the short nominal rate ``i_S = R - mp + pi_e``.

Function families::

    I(Y, R)   = i0 + a*tanh(b*(Y - ym)) + linear_slope*Y - h*R
    S(Y, R)   = s0 + s*Y + g*R
    L(Y, i_S) = l*Y + phi(i_S),  phi'(i) = -d - kappa_l*(i - p)*(i - q)
    M(Y, i_S) = m*Y + psi(i_S),  psi'(i) = e + kappa_m*(i - p)*(i - q)

``phi`` and ``psi`` are exact cubic antiderivatives vanishing at ``i = 0``.
With ``kappa_l = kappa_m = 0`` the money side is linear; with ``d = e = 0``
and positive kappas the slopes change sign exactly at ``p`` and ``q``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import brentq

from islm.errors import DomainError, GridError, NoKaldorInterval

FD_STEP = 1e-6
Y_EPS = 1e-4


class Regime(str, enum.Enum):
    ORIGINAL_DEGENERATE = "OriginalDegenerate"
    KALDOR_GOODS = "KaldorGoods"
    THREE_PHASE_MONEY = "ThreePhaseMoney"


class FastSide(str, enum.Enum):
    GOODS = "Goods"
    MONEY = "Money"


@dataclass(frozen=True)
class InvestParams:
    i0: float = 1.0
    a: float = 0.0
    b: float = 1.0
    ym: float = 0.0
    h: float = 0.4
    linear_slope: float = 0.0


@dataclass(frozen=True)
class SaveParams:
    s: float = 0.3
    g: float = 0.2
    s0: float = 0.0


@dataclass(frozen=True)
class MoneyDemandParams:
    l: float = 0.5  # noqa: E741
    d: float = 0.3
    kappa_l: float = 0.0
    p: float = 2.0
    q: float = 4.0


@dataclass(frozen=True)
class MoneySupplyParams:
    m: float = 0.2
    e: float = 0.1
    kappa_m: float = 0.0


_BLOCKS = {
    "invest": InvestParams,
    "save": SaveParams,
    "demand": MoneyDemandParams,
    "supply": MoneySupplyParams,
}


@dataclass(frozen=True)
class ModelConfig:
    """Every scalar parameter of the dynamic model plus the function blocks.

    ``epsilon`` multiplies the slow equation; ``fast_side`` says which equation
    stays unscaled. ``epsilon = 0`` is accepted and gives the frozen
    (reduced) fast subsystem.
    """

    alpha: float = 1.0
    beta: float = 1.0
    epsilon: float = 1e-3
    m_s: float = 1.0
    mp: float = 0.0
    pi_e: float = 0.0
    invest: InvestParams = field(default_factory=InvestParams)
    save: SaveParams = field(default_factory=SaveParams)
    demand: MoneyDemandParams = field(default_factory=MoneyDemandParams)
    supply: MoneySupplyParams = field(default_factory=MoneySupplyParams)
    regime: Regime = Regime.KALDOR_GOODS
    fast_side: FastSide = FastSide.GOODS

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "fast_side", FastSide(self.fast_side))
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if not self.m_s > 0:
            raise ValueError("m_s must be positive")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if not self.demand.p < self.demand.q:
            raise ValueError("phase boundaries need p < q")
        for name in ("alpha", "beta", "epsilon", "m_s", "mp", "pi_e"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["regime"] = self.regime.value
        out["fast_side"] = self.fast_side.value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key in _BLOCKS:
                block = _BLOCKS[key]
                if not isinstance(value, dict):
                    raise ValueError(f"{key} must be an object")
                bad = set(value) - {f.name for f in fields(block)}
                if bad:
                    raise ValueError(f"unknown fields in {key}: {sorted(bad)}")
                kwargs[key] = block(**{k: _number(f"{key}.{k}", v) for k, v in value.items()})
            elif key in ("regime", "fast_side"):
                kwargs[key] = value
            else:
                kwargs[key] = _number(key, value)
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ModelConfig:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> ModelConfig:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def with_epsilon(self, epsilon: float) -> ModelConfig:
        return replace(self, epsilon=epsilon)


def _number(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be a number")
    return float(value)


@dataclass(frozen=True)
class State:
    y: float
    r: float

    def __post_init__(self):
        if not self.y >= 0:
            raise DomainError(f"aggregate income must be non-negative, got {self.y}")

    def short_rate(self, cfg: ModelConfig) -> float:
        return short_rate(self.r, cfg)


@dataclass(frozen=True)
class GridSpec:
    y_min: float = 0.0
    y_max: float = 12.0
    r_min: float = -1.0
    r_max: float = 8.0
    ny: int = 201
    nr: int = 201

    def __post_init__(self):
        if self.ny < 2 or self.nr < 2:
            raise GridError("grid needs at least 2 nodes per axis")
        if not (self.y_max > self.y_min and self.r_max > self.r_min):
            raise GridError("grid ranges must be increasing")
        if self.y_min < 0:
            raise GridError("grid must not extend below Y = 0")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.y_min, self.y_max, self.ny),
                np.linspace(self.r_min, self.r_max, self.nr))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        ys, rs = self.axes()
        return np.meshgrid(ys, rs, indexing="ij")


def default_kaldor() -> ModelConfig:
    """Goods-market (Kaldor) default: folded IS, linear money side."""
    return ModelConfig(
        alpha=1.0, beta=1.0, epsilon=1e-3, m_s=1.0, mp=0.01, pi_e=0.02,
        invest=InvestParams(i0=2.96, a=1.0, b=0.8, ym=6.0, h=0.4, linear_slope=0.0),
        save=SaveParams(s=0.3, g=0.2, s0=0.0),
        demand=MoneyDemandParams(l=0.5, d=0.3, kappa_l=0.0, p=1.2, q=3.2),
        supply=MoneySupplyParams(m=0.2, e=0.1, kappa_m=0.0),
        regime=Regime.KALDOR_GOODS, fast_side=FastSide.GOODS,
    )


def default_three_phase() -> ModelConfig:
    """Money-market default: three-phase money demand/supply, folded LM."""
    return ModelConfig(
        alpha=1.0, beta=1.0, epsilon=1e-3, m_s=1.0, mp=0.01, pi_e=0.02,
        invest=InvestParams(i0=2.62, a=0.0, b=0.8, ym=6.0, h=0.4, linear_slope=0.14),
        save=SaveParams(s=0.3, g=0.2, s0=0.0),
        demand=MoneyDemandParams(l=0.5, d=0.0, kappa_l=0.72, p=1.2, q=3.2),
        supply=MoneySupplyParams(m=0.2, e=0.0, kappa_m=0.48),
        regime=Regime.THREE_PHASE_MONEY, fast_side=FastSide.MONEY,
    )


def default_grid(cfg: ModelConfig | None = None) -> GridSpec:
    """Verification grid; the three-phase grid keeps ``i_S`` positive."""
    if cfg is not None and cfg.regime is Regime.THREE_PHASE_MONEY:
        return GridSpec(r_min=max(0.0, cfg.mp - cfg.pi_e + 0.01), r_max=8.0)
    return GridSpec()


# -- functions -----------------------------------------------------------

def short_rate(r, cfg: ModelConfig):
    return r - cfg.mp + cfg.pi_e


def _cubic(i, p, q):
    return i**3 / 3.0 - 0.5 * (p + q) * i**2 + p * q * i


def _phase(i, p, q):
    return (i - p) * (i - q)


def eval_functions(s: State | tuple, cfg: ModelConfig, check_domain: bool = True):
    """Return ``(I, S, L, M)``. Accepts a :class:`State` or arrays ``(y, r)``.

    ``check_domain=False`` evaluates the formulas past ``Y = 0``; curve
    tracing needs that when a predictor step overshoots the boundary.
    """
    y, r = _unpack(s)
    if check_domain and np.any(np.asarray(y) < 0):
        raise DomainError("aggregate income must be non-negative")
    inv, sav, dem, sup = cfg.invest, cfg.save, cfg.demand, cfg.supply
    i = short_rate(r, cfg)
    cub = _cubic(i, dem.p, dem.q)
    I = inv.i0 + inv.a * np.tanh(inv.b * (y - inv.ym)) + inv.linear_slope * y - inv.h * r
    S = sav.s0 + sav.s * y + sav.g * r
    L = dem.l * y - dem.d * i - dem.kappa_l * cub
    M = sup.m * y + sup.e * i + sup.kappa_m * cub
    return I, S, L, M


def partials(s: State | tuple, cfg: ModelConfig) -> dict[str, Any]:
    """Closed-form first partials keyed ``I_Y, I_R, S_Y, ..., M_R``.

    R-partials of L and M equal their i_S-partials because mp and pi_e
    are constants.
    """
    y, r = _unpack(s)
    inv, sav, dem, sup = cfg.invest, cfg.save, cfg.demand, cfg.supply
    i = short_rate(r, cfg)
    ph = _phase(i, dem.p, dem.q)
    ones = np.ones_like(np.asarray(y + r, dtype=float))
    sech = 1.0 / np.cosh(inv.b * (y - inv.ym))
    return {
        "I_Y": inv.a * inv.b * sech**2 + inv.linear_slope,
        "I_R": -inv.h * ones,
        "S_Y": sav.s * ones,
        "S_R": sav.g * ones,
        "L_Y": dem.l * ones,
        "L_R": -dem.d - dem.kappa_l * ph,
        "M_Y": sup.m * ones,
        "M_R": sup.e + sup.kappa_m * ph,
    }


def fd_partials(s: State | tuple, cfg: ModelConfig, step: float = FD_STEP) -> dict[str, Any]:
    """Central finite-difference partials with the same keys as :func:`partials`.

    Y-steps are one-sided (forward) where ``y < step`` to stay in the domain.
    """
    y, r = _unpack(s)
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    lo = np.maximum(y - step, 0.0)
    hi = lo + 2 * step
    fy_hi = eval_functions((hi, r), cfg)
    fy_lo = eval_functions((lo, r), cfg)
    fr_hi = eval_functions((y, r + step), cfg)
    fr_lo = eval_functions((y, r - step), cfg)
    out = {}
    for k, name in enumerate("ISLM"):
        out[f"{name}_Y"] = (fy_hi[k] - fy_lo[k]) / (hi - lo)
        out[f"{name}_R"] = (fr_hi[k] - fr_lo[k]) / (2 * step)
    return out


def goods_residual(y, r, cfg: ModelConfig):
    I, S, _, _ = eval_functions((y, r), cfg)
    return I - S


def money_residual(y, r, cfg: ModelConfig):
    _, _, L, M = eval_functions((y, r), cfg)
    return L - M - cfg.m_s


def r_is(y, cfg: ModelConfig):
    """The IS curve as an explicit graph ``R_IS(Y)``.

    I - S is affine in R with slope ``-(h + g)``, so the zero set is a graph.
    """
    inv, sav = cfg.invest, cfg.save
    num = (inv.i0 - sav.s0 + inv.a * np.tanh(inv.b * (y - inv.ym))
           + (inv.linear_slope - sav.s) * y)
    return num / (inv.h + sav.g)


def r_lm_roots(y: float, cfg: ModelConfig, r_lo: float = -60.0, r_hi: float = 60.0,
               n: int = 6001) -> list[float]:
    """All roots in R of the LM equation at fixed income ``y``."""
    rs = np.linspace(r_lo, r_hi, n)
    vals = money_residual(np.full_like(rs, y), rs, cfg)
    roots = []
    for k in range(n - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            roots.append(float(rs[k]))
        elif a * b < 0:
            roots.append(brentq(lambda rr: float(money_residual(y, rr, cfg)),
                                rs[k], rs[k + 1], xtol=1e-14))
    return roots


def _unpack(s):
    if isinstance(s, State):
        return s.y, s.r
    y, r = s
    return y, r


# -- Kaldor interval ------------------------------------------------------

def kaldor_interval(cfg: ModelConfig, r_fixed: float = 0.0,
                    y_range: tuple[float, float] = (0.0, 12.0)) -> tuple[float, float]:
    """Roots ``X < Z`` of ``I_Y = S_Y`` in Y at fixed R.

    Raises :class:`NoKaldorInterval` when saving always out-slopes investment
    or the slope equation does not have exactly two roots in ``y_range``.
    """
    inv = cfg.invest
    if inv.a * inv.b + inv.linear_slope <= cfg.save.s:
        raise NoKaldorInterval("investment never out-slopes saving")

    def diff(y):
        p = partials((y, r_fixed), cfg)
        return float(p["I_Y"] - p["S_Y"])

    ys = np.linspace(y_range[0], y_range[1], 2401)
    vals = np.array([diff(v) for v in ys])
    roots = []
    for k in range(len(ys) - 1):
        if vals[k] == 0.0:
            roots.append(float(ys[k]))
        elif vals[k] * vals[k + 1] < 0:
            roots.append(brentq(diff, ys[k], ys[k + 1], xtol=1e-13))
    if len(roots) != 2:
        raise NoKaldorInterval(f"slope equation has {len(roots)} roots in {y_range}")
    return roots[0], roots[1]


# -- verification ----------------------------------------------------------

@dataclass
class ConditionReport:
    regime: Regime
    grid_spec: GridSpec
    violations: list[dict[str, Any]]
    kaldor_interval: tuple[float, float] | None
    intersection_ok: bool
    r_is_0: float | None = None
    r_lm_0: float | None = None
    fd_max_rel_error: float = 0.0
    nodes_inner_phase: int = 0
    nodes_outer_phase: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def violated_conditions(self) -> list[str]:
        return sorted({v["condition"] for v in self.violations}, key=_cond_key)

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime.value,
            "grid_spec": asdict(self.grid_spec),
            "passed": self.passed,
            "violations": self.violations,
            "kaldor_interval": list(self.kaldor_interval) if self.kaldor_interval else None,
            "intersection_ok": self.intersection_ok,
            "r_is_0": self.r_is_0,
            "r_lm_0": self.r_lm_0,
            "fd_max_rel_error": self.fd_max_rel_error,
            "nodes_inner_phase": self.nodes_inner_phase,
            "nodes_outer_phase": self.nodes_outer_phase,
        }


def _cond_key(c: str):
    return (0, int(c)) if c.isdigit() else (1, c)


PHASE_TOL = 1e-9
REMARK_TOL = 1e-6
FD_REL_TOL = 1e-6


def verify_conditions(cfg: ModelConfig, grid: GridSpec | None = None) -> ConditionReport:
    """Check every inequality that applies to ``cfg.regime`` at every grid node.

    Inequalities are evaluated on central finite-difference partials; those are
    also compared with the closed forms (relative error with a unit floor).
    """
    grid = grid or default_grid(cfg)
    Y, R = grid.mesh()
    iS = short_rate(R, cfg)
    regime = cfg.regime
    if regime is Regime.THREE_PHASE_MONEY and np.any(iS <= 0):
        raise GridError("three-phase verification needs i_S > 0 over the grid")

    fd = fd_partials((Y, R), cfg)
    cf = partials((Y, R), cfg)
    fd_err = max(float(np.max(np.abs(fd[k] - cf[k]) / np.maximum(np.abs(cf[k]), 1.0)))
                 for k in cf)

    violations: list[dict[str, Any]] = []

    def check(cond: str, quantity: str, ok, values, mask=None):
        bad = ~ok if mask is None else (~ok & mask)
        for idx in zip(*np.nonzero(bad)):
            violations.append({
                "condition": cond, "quantity": quantity,
                "y": float(Y[idx]), "r": float(R[idx]),
                "value": float(values[idx]),
            })

    p, q = cfg.demand.p, cfg.demand.q
    at_boundary = (np.abs(iS - p) <= PHASE_TOL) | (np.abs(iS - q) <= PHASE_TOL)
    inner = (iS > p) & (iS < q) & ~at_boundary
    outer = ~inner & ~at_boundary
    if regime is not Regime.THREE_PHASE_MONEY:
        inner = np.zeros_like(inner)
        outer = np.ones_like(outer)
        at_boundary = np.zeros_like(at_boundary)

    I_Y, I_R, S_Y, S_R = fd["I_Y"], fd["I_R"], fd["S_Y"], fd["S_R"]
    L_Y, L_R, M_Y, M_R = fd["L_Y"], fd["L_R"], fd["M_Y"], fd["M_R"]
    check("3", "I_Y", (I_Y > 0) & (I_Y < 1), I_Y)
    check("3", "I_R", I_R < 0, I_R)
    check("4", "S_Y", (S_Y > 0) & (S_Y < 1), S_Y)
    check("4", "S_R", S_R > 0, S_R)
    check("5", "L_Y", L_Y > 0, L_Y)
    check("5", "L_R", L_R < 0, L_R, outer)

    if regime is Regime.ORIGINAL_DEGENERATE:
        sup = cfg.supply
        if (sup.m, sup.e, sup.kappa_m, cfg.mp, cfg.pi_e, cfg.demand.kappa_l) != (0, 0, 0, 0, 0, 0):
            violations.append({"condition": "degenerate", "quantity": "M,MP,pi_e",
                               "y": None, "r": None, "value": None})
    else:
        check("10", "M_Y", (M_Y > 0) & (M_Y < L_Y), M_Y)
        check("11", "M_R", M_R > 0, M_R, outer)

    kaldor = None
    if regime is Regime.KALDOR_GOODS:
        r_mid = 0.5 * (grid.r_min + grid.r_max)
        try:
            kaldor = kaldor_interval(cfg, r_mid, (grid.y_min, grid.y_max))
        except NoKaldorInterval as exc:
            violations.append({"condition": "16", "quantity": str(exc),
                               "y": None, "r": None, "value": None})
        if kaldor is not None:
            X, Z = kaldor
            diff = I_Y - S_Y
            away = (np.abs(Y - X) > 1e-9) & (np.abs(Y - Z) > 1e-9)
            want_pos = (Y > X) & (Y < Z)
            ok = np.where(want_pos, diff > 0, diff < 0)
            check("16", "I_Y-S_Y", ok, diff, away)
    else:
        check("12", "I_Y-S_Y", I_Y < S_Y, I_Y - S_Y)

    n_inner = n_outer = 0
    if regime is Regime.THREE_PHASE_MONEY:
        check("19", "L_R", L_R > 0, L_R, inner)
        check("20", "M_R", M_R < 0, M_R, inner)
        check("remark", "L_R", np.abs(L_R) <= REMARK_TOL, L_R, at_boundary)
        check("remark", "M_R", np.abs(M_R) <= REMARK_TOL, M_R, at_boundary)
        n_inner, n_outer = int(inner.sum()), int(outer.sum())

    if fd_err > FD_REL_TOL:
        violations.append({"condition": "fd", "quantity": "closed-form vs finite difference",
                           "y": None, "r": None, "value": fd_err})

    r_is0 = float(r_is(Y_EPS, cfg))
    lm_roots = r_lm_roots(Y_EPS, cfg)
    r_lm0 = max(lm_roots) if lm_roots else None
    intersection_ok = r_lm0 is not None and r_is0 > r_lm0
    if not intersection_ok:
        violations.append({"condition": "13", "quantity": "R_IS(0+) - R_LM(0+)",
                           "y": Y_EPS, "r": None,
                           "value": None if r_lm0 is None else r_is0 - r_lm0})

    return ConditionReport(
        regime=regime, grid_spec=grid, violations=violations,
        kaldor_interval=kaldor, intersection_ok=intersection_ok,
        r_is_0=r_is0, r_lm_0=r_lm0, fd_max_rel_error=fd_err,
        nodes_inner_phase=n_inner, nodes_outer_phase=n_outer,
    )
