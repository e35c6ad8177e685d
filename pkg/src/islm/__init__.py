"""Slow-fast IS-LM dynamics: conditions, equilibria, isoclines, relaxation cycles."""

from islm.econ_model import (
    FastSide,
    GridSpec,
    ModelConfig,
    Regime,
    State,
    default_kaldor,
    default_three_phase,
    verify_conditions,
)

__all__ = [
    "FastSide",
    "GridSpec",
    "ModelConfig",
    "Regime",
    "State",
    "default_kaldor",
    "default_three_phase",
    "verify_conditions",
]
