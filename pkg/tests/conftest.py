import dataclasses
import functools

import numpy as np
import pytest

from islm.econ_model import (
    FastSide,
    InvestParams,
    ModelConfig,
    MoneyDemandParams,
    MoneySupplyParams,
    Regime,
    SaveParams,
    default_kaldor,
    default_three_phase,
)

ACCEPTANCE_LINES: dict[int, str] = {}


def affine_config(**overrides) -> ModelConfig:
    """Linear IS and LM: the equilibrium is the solution of a 2x2 linear system."""
    cfg = ModelConfig(
        alpha=1.0, beta=1.0, epsilon=1e-2, m_s=1.0, mp=0.0, pi_e=0.0,
        invest=InvestParams(i0=2.0, a=0.0, b=1.0, ym=0.0, h=0.4, linear_slope=0.1),
        save=SaveParams(s=0.3, g=0.2, s0=0.0),
        demand=MoneyDemandParams(l=0.5, d=0.3, kappa_l=0.0, p=1.0, q=2.0),
        supply=MoneySupplyParams(m=0.0, e=0.0, kappa_m=0.0),
        regime=Regime.ORIGINAL_DEGENERATE, fast_side=FastSide.GOODS,
    )
    return dataclasses.replace(cfg, **overrides)


def kaldor_with(**overrides) -> ModelConfig:
    return dataclasses.replace(default_kaldor(), **overrides)


@pytest.fixture
def kaldor():
    return default_kaldor()


@pytest.fixture
def three_phase():
    return default_three_phase()


@pytest.fixture
def affine():
    return affine_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@functools.lru_cache(maxsize=None)
def cached_cycle(name: str, eps: float):
    from islm.slowfast import detect_cycle
    cfg = default_kaldor() if name == "kaldor" else default_three_phase()
    return detect_cycle(cfg.with_epsilon(eps))


@functools.lru_cache(maxsize=None)
def cached_curve(name: str, which: str):
    from islm.isocline import trace_isocline
    cfg = default_kaldor() if name == "kaldor" else default_three_phase()
    return trace_isocline(which, cfg)


@functools.lru_cache(maxsize=None)
def cached_kaldor_sweep():
    from islm.scenario import SweepSpec, sweep
    values = tuple(np.round(np.arange(0.95, 1.1 + 1e-12, 0.0025), 10))
    return sweep(SweepSpec("MonetaryMS", values, default_kaldor()))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
