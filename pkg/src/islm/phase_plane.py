"""Vector field, Jacobian, equilibria and their planar classification."""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from islm.econ_model import (
    FastSide,
    GridSpec,
    ModelConfig,
    State,
    default_grid,
    eval_functions,
    partials,
    r_is,
)
from islm.errors import NoEquilibrium

RESIDUAL_TOL = 1e-10
MERGE_TOL = 1e-6
DISC_TOL = 1e-12
ZERO_EIG_TOL = 1e-7
NEWTON_MAX_ITER = 50


class Kind(str, enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_FOCUS = "UnstableFocus"
    SADDLE = "Saddle"
    DEGENERATE = "DegenerateZeroEig"

    @property
    def is_attractor(self) -> bool:
        return self in (Kind.STABLE_NODE, Kind.STABLE_FOCUS)


@dataclass(frozen=True)
class VectorFieldValue:
    dy_dt: float
    dr_dt: float


@dataclass(frozen=True)
class Jacobian2:
    j11: float
    j12: float
    j21: float
    j22: float

    @property
    def trace(self) -> float:
        return self.j11 + self.j22

    @property
    def det(self) -> float:
        return self.j11 * self.j22 - self.j12 * self.j21

    def as_array(self) -> np.ndarray:
        return np.array([[self.j11, self.j12], [self.j21, self.j22]])


@dataclass(frozen=True)
class Equilibrium:
    state: State
    jac: Jacobian2
    eigs: tuple[complex, complex]
    kind: Kind
    residual: float

    def to_dict(self) -> dict:
        return {
            "y": self.state.y,
            "r": self.state.r,
            "kind": self.kind.value,
            "eig_real": [self.eigs[0].real, self.eigs[1].real],
            "eig_imag": [self.eigs[0].imag, self.eigs[1].imag],
            "trace": self.jac.trace,
            "det": self.jac.det,
            "residual": self.residual,
        }


def speeds(cfg: ModelConfig) -> tuple[float, float]:
    """Multipliers of (I - S) and (L - M - m_s) in the dynamic equations."""
    if cfg.fast_side is FastSide.GOODS:
        return cfg.alpha, cfg.epsilon * cfg.beta
    return cfg.epsilon * cfg.alpha, cfg.beta


def vector_field(s: State | tuple, cfg: ModelConfig) -> VectorFieldValue:
    y, r = (s.y, s.r) if isinstance(s, State) else s
    I, S, L, M = eval_functions((y, r), cfg)
    ky, kr = speeds(cfg)
    return VectorFieldValue(ky * (I - S), kr * (L - M - cfg.m_s))


def jacobian(s: State | tuple, cfg: ModelConfig) -> Jacobian2:
    y, r = (s.y, s.r) if isinstance(s, State) else s
    p = partials((y, r), cfg)
    ky, kr = speeds(cfg)
    return Jacobian2(
        float(ky * (p["I_Y"] - p["S_Y"])),
        float(ky * (p["I_R"] - p["S_R"])),
        float(kr * (p["L_Y"] - p["M_Y"])),
        float(kr * (p["L_R"] - p["M_R"])),
    )


def eigen2(j: Jacobian2) -> tuple[complex, complex]:
    """Roots of ``lam^2 - trace*lam + det`` without cancellation."""
    t, d = j.trace, j.det
    disc = t * t - 4.0 * d
    if disc >= 0:
        root = math.sqrt(disc)
        qv = 0.5 * (t + math.copysign(root, t))
        if qv == 0.0:
            return complex(0.0), complex(0.0)
        a, b = qv, d / qv
        return (complex(a), complex(b)) if a <= b else (complex(b), complex(a))
    im = 0.5 * math.sqrt(-disc)
    return complex(0.5 * t, -im), complex(0.5 * t, im)


def explicit_eigenvalues(s: State | tuple, cfg: ModelConfig) -> tuple[complex, complex]:
    """Eigenvalues assembled directly from the economic partials.

    ``0.5 * [T +- sqrt(T^2 - 4 det)]`` with ``T`` the weighted sum of the goods
    and money own-slopes and ``det`` the weighted cross-product of slopes.
    """
    y, r = (s.y, s.r) if isinstance(s, State) else s
    p = partials((y, r), cfg)
    ky, kr = speeds(cfg)
    gy = float(p["I_Y"] - p["S_Y"])
    gr = float(p["I_R"] - p["S_R"])
    my = float(p["L_Y"] - p["M_Y"])
    mr = float(p["L_R"] - p["M_R"])
    t = ky * gy + kr * mr
    det = ky * kr * (gy * mr - gr * my)
    root = cmath.sqrt(t * t - 4 * det)
    return 0.5 * (t - root), 0.5 * (t + root)


def classify(j: Jacobian2, eigs: Sequence[complex] | None = None) -> Kind:
    eigs = eigs if eigs is not None else eigen2(j)
    if min(abs(e) for e in eigs) < ZERO_EIG_TOL:
        return Kind.DEGENERATE
    d, t = j.det, j.trace
    if d < 0:
        return Kind.SADDLE
    disc = t * t - 4 * d
    stable = t < 0
    if disc < -DISC_TOL:
        return Kind.STABLE_FOCUS if stable else Kind.UNSTABLE_FOCUS
    return Kind.STABLE_NODE if stable else Kind.UNSTABLE_NODE


def make_equilibrium(y: float, r: float, cfg: ModelConfig) -> Equilibrium:
    st = State(y, r)
    j = jacobian(st, cfg)
    eigs = eigen2(j)
    return Equilibrium(st, j, eigs, classify(j, eigs), _res_norm(y, r, cfg))


# -- root finding ---------------------------------------------------------

def _raw(y, r, cfg):
    I, S, L, M = eval_functions((y, r), cfg)
    return np.array([float(I - S), float(L - M - cfg.m_s)])


def _raw_jac(y, r, cfg):
    p = partials((y, r), cfg)
    return np.array([[float(p["I_Y"] - p["S_Y"]), float(p["I_R"] - p["S_R"])],
                     [float(p["L_Y"] - p["M_Y"]), float(p["L_R"] - p["M_R"])]])


def _res_norm(y, r, cfg) -> float:
    return float(np.max(np.abs(_raw(y, r, cfg))))


def newton(y0: float, r0: float, cfg: ModelConfig, tol: float = 1e-12,
           max_iter: int = NEWTON_MAX_ITER) -> tuple[float, float] | None:
    """Damped Newton on the unscaled residuals; ``None`` when it fails."""
    x = np.array([y0, r0], dtype=float)
    if x[0] < 0:
        x[0] = 0.0
    f = _raw(*x, cfg)
    nf = np.max(np.abs(f))
    for _ in range(max_iter):
        if nf < tol:
            break
        try:
            step = np.linalg.solve(_raw_jac(*x, cfg), -f)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            if trial[0] >= 0:
                ft = _raw(*trial, cfg)
                nt = np.max(np.abs(ft))
                if nt < nf or nt < tol:
                    x, f, nf = trial, ft, nt
                    break
            lam *= 0.5
        else:
            break
    if not np.all(np.isfinite(x)) or nf >= RESIDUAL_TOL:
        return None
    return float(x[0]), float(x[1])


def _is_graph_roots(cfg: ModelConfig, y_lo: float, y_hi: float, n: int = 4001):
    """Equilibria as roots of the LM residual along the IS graph.

    Breakpoints where the restricted residual turns are located first, so
    the residual is monotone between consecutive breakpoints and nearly
    coincident roots next to a fold are still separated.
    """
    h_g = cfg.invest.h + cfg.save.g

    def G(y):
        return float(_raw(y, float(r_is(y, cfg)), cfg)[1])

    def dG(y):
        r = float(r_is(y, cfg))
        p = partials((y, r), cfg)
        drdy = float(p["I_Y"] - p["S_Y"]) / h_g
        return float(p["L_Y"] - p["M_Y"]) + float(p["L_R"] - p["M_R"]) * drdy

    ys = np.linspace(y_lo, y_hi, n)
    rs = r_is(ys, cfg)
    p = partials((ys, rs), cfg)
    dg = (p["L_Y"] - p["M_Y"]) + (p["L_R"] - p["M_R"]) * (p["I_Y"] - p["S_Y"]) / h_g
    brk = [y_lo]
    for k in range(n - 1):
        if dg[k] * dg[k + 1] < 0:
            brk.append(brentq(dG, ys[k], ys[k + 1], xtol=1e-15))
    brk.append(y_hi)
    roots = []
    for a, b in zip(brk[:-1], brk[1:]):
        ga, gb = G(a), G(b)
        if ga == 0.0:
            roots.append(a)
        if ga * gb < 0:
            roots.append(brentq(G, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if G(y_hi) == 0.0:
        roots.append(y_hi)
    return [(y, float(r_is(y, cfg))) for y in roots]


def _grid_seeds(cfg: ModelConfig, grid: GridSpec):
    Y, R = grid.mesh()
    I, S, L, M = eval_functions((Y, R), cfg)
    f1 = np.sign(I - S)
    f2 = np.sign(L - M - cfg.m_s)

    def changes(f):
        c = np.stack([f[:-1, :-1], f[1:, :-1], f[:-1, 1:], f[1:, 1:]])
        return (c.max(axis=0) >= 0) & (c.min(axis=0) <= 0)

    cells = changes(f1) & changes(f2)
    iy, ir = np.nonzero(cells)
    ys, rs = grid.axes()
    return [(0.5 * (ys[a] + ys[a + 1]), 0.5 * (rs[b] + rs[b + 1])) for a, b in zip(iy, ir)]


def _edge_seeds(cfg: ModelConfig, grid: GridSpec, cell: tuple[float, float]):
    """IS zero crossings on the edges of the grid cell around ``cell``."""
    ys, rs = grid.axes()
    a = int(np.clip(np.searchsorted(ys, cell[0]) - 1, 0, len(ys) - 2))
    b = int(np.clip(np.searchsorted(rs, cell[1]) - 1, 0, len(rs) - 2))
    y0, y1, r0, r1 = ys[a], ys[a + 1], rs[b], rs[b + 1]
    out = []
    edges = [((y0, r0), (y1, r0)), ((y0, r1), (y1, r1)), ((y0, r0), (y0, r1)), ((y1, r0), (y1, r1))]
    for (ya, ra), (yb, rb) in edges:
        def f(t):
            return float(_raw(ya + t * (yb - ya), ra + t * (rb - ra), cfg)[0])
        fa, fb = f(0.0), f(1.0)
        if fa * fb <= 0:
            t = brentq(f, 0.0, 1.0, xtol=1e-14) if fa * fb < 0 else (0.0 if fa == 0 else 1.0)
            out.append((ya + t * (yb - ya), ra + t * (rb - ra)))
    return out


def find_equilibria(cfg: ModelConfig, grid: GridSpec | None = None,
                    seeds: Iterable[tuple[float, float]] = ()) -> list[Equilibrium]:
    """All equilibria with ``Y >= 0`` inside the grid's Y range, sorted by Y.

    Raises :class:`NoEquilibrium` when none is found.
    """
    grid = grid or default_grid(cfg)
    found: list[tuple[float, float]] = list(_is_graph_roots(cfg, grid.y_min, grid.y_max))
    candidates = list(seeds) + _grid_seeds(cfg, grid)
    for y0, r0 in candidates:
        sol = newton(y0, r0, cfg)
        if sol is None:
            for ey, er in _edge_seeds(cfg, grid, (y0, r0)):
                sol = newton(ey, er, cfg)
                if sol is not None:
                    break
        if sol is not None:
            found.append(sol)

    pts = []
    for y, r in found:
        if y < 0 or y < grid.y_min - 1e-12 or y > grid.y_max + 1e-12:
            continue
        polished = newton(y, r, cfg) or (y, r)
        if _res_norm(*polished, cfg) < RESIDUAL_TOL:
            pts.append(polished)
    pts.sort()
    merged: list[tuple[float, float]] = []
    for p in pts:
        if merged and math.hypot(p[0] - merged[-1][0], p[1] - merged[-1][1]) < MERGE_TOL:
            continue
        merged.append(p)
    if not merged:
        raise NoEquilibrium("no intersection of IS and LM found")
    return [make_equilibrium(y, r, cfg) for y, r in merged]
