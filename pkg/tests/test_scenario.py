import math

import numpy as np
import pytest

from islm.econ_model import State, r_is
from islm.errors import ConditionBroken, NoHysteresis
from islm.isocline import fold_values
from islm.phase_plane import Kind, find_equilibria
from islm.scenario import (
    Parameter,
    SweepSpec,
    apply_shift,
    hysteresis_run,
    settle,
    sweep,
)

from conftest import affine_config, cached_curve, cached_kaldor_sweep, kaldor_with


def _kaldor_fold_oracle(cfg):
    """Money stocks at which the linear LM is tangent to the tanh IS curve."""
    inv, sav, dem, sup = cfg.invest, cfg.save, cfg.demand, cfg.supply
    lm_slope = (dem.l - sup.m) / (dem.d + sup.e)
    sech2 = (lm_slope * (inv.h + sav.g) + sav.s - inv.linear_slope) / (inv.a * inv.b)
    half = math.acosh(1 / math.sqrt(sech2)) / inv.b
    out = []
    for y in (inv.ym - half, inv.ym + half):
        i_s = float(r_is(y, cfg)) - cfg.mp + cfg.pi_e
        out.append((dem.l - sup.m) * y - (dem.d + sup.e) * i_s)
    return sorted(out)


def _three_phase_fold_rates(cfg):
    """Short rates at which the backward-bending LM is tangent to the linear IS."""
    inv, sav, dem, sup = cfg.invest, cfg.save, cfg.demand, cfg.supply
    sigma = (sav.s - inv.linear_slope) / (inv.h + sav.g)
    u = (dem.l - sup.m) / ((dem.kappa_l + sup.kappa_m) * sigma)
    mid, half = 0.5 * (dem.p + dem.q), math.sqrt((0.5 * (dem.q - dem.p)) ** 2 - u)
    return mid - half, mid + half


def test_zero_fiscal_shift_is_identity(kaldor):
    assert apply_shift(kaldor, "FiscalShift", 0.0) == kaldor


def test_money_stock_must_stay_positive(kaldor):
    with pytest.raises(ValueError):
        apply_shift(kaldor, Parameter.MONETARY_MS, 0.0)


def test_slow_parameter_has_no_shifted_config(kaldor):
    with pytest.raises(ValueError):
        apply_shift(kaldor, "Slow", 1.0)


def test_large_fiscal_contraction_breaks_intersection(kaldor):
    with pytest.raises(ConditionBroken) as info:
        apply_shift(kaldor, "FiscalShift", -4.0)
    assert "13" in info.value.report.violated_conditions()


def test_affine_monetary_expansion_lowers_rate():
    base = affine_config()
    inv, sav, dem = base.invest, base.save, base.demand
    A = np.array([[inv.linear_slope - sav.s, -(inv.h + sav.g)], [dem.l, -dem.d]])
    before = find_equilibria(base)[0].state
    shifted = apply_shift(base, "MonetaryMS", 2 * base.m_s, verify=False)
    after = find_equilibria(shifted)[0].state
    y, r = np.linalg.solve(A, [sav.s0 - inv.i0, 2 * base.m_s])
    assert after.r < before.r
    assert (after.y, after.r) == pytest.approx((y, r), abs=1e-10)


def test_kaldor_money_sweep_goes_one_three_one(kaldor):
    d = cached_kaldor_sweep()
    counts = d.counts
    assert counts[0] == counts[-1] == 1 and max(counts) == 3
    changes = [k for k in range(len(counts) - 1) if counts[k] != counts[k + 1]]
    assert len(changes) == 2
    oracle = _kaldor_fold_oracle(kaldor)
    got = sorted(f.parameter_value for f in d.folds)
    assert got == pytest.approx(oracle, abs=1e-7)


def test_kaldor_folds_are_degenerate_and_merge_saddle(kaldor):
    for f in cached_kaldor_sweep().folds:
        assert abs(f.det) < 1e-8
        assert min(abs(z) for z in f.eigs) < 1e-6
        assert "Saddle" in f.merging_kinds


def test_middle_branch_is_a_saddle():
    d = cached_kaldor_sweep()
    for eqs in d.equilibria:
        if len(eqs) == 3:
            assert eqs[1].kind is Kind.SADDLE


def test_branches_are_continuous():
    d = cached_kaldor_sweep()
    step = d.values[1] - d.values[0]
    for a, b in zip(d.equilibria, d.equilibria[1:]):
        if len(a) == len(b) == 1:
            assert math.hypot(a[0].state.y - b[0].state.y, a[0].state.r - b[0].state.r) < 100 * step


def test_affine_sweep_keeps_one_equilibrium():
    d = sweep(SweepSpec("MonetaryMS", tuple(np.linspace(0.5, 2.0, 16)), affine_config()))
    assert set(d.counts) == {1} and d.folds == []


def test_three_phase_fiscal_sweep_folds_at_tangency(three_phase):
    values = tuple(np.round(np.arange(0.07, 0.11 + 1e-12, 0.002), 10))
    d = sweep(SweepSpec("FiscalShift", values, three_phase))
    assert d.counts[0] == d.counts[-1] == 1 and max(d.counts) == 3
    lo, hi = _three_phase_fold_rates(three_phase)
    rates = sorted(f.state.short_rate(three_phase) for f in d.folds)
    assert rates == pytest.approx([lo, hi], abs=1e-6)
    mids = [eqs[1].kind for eqs in d.equilibria if len(eqs) == 3]
    assert mids and all(k is Kind.SADDLE for k in mids)


def test_warm_and_cold_sweeps_agree(kaldor):
    warm = cached_kaldor_sweep()
    for v, eqs in list(zip(warm.values, warm.equilibria))[::7]:
        cold = find_equilibria(apply_shift(kaldor, "MonetaryMS", v))
        assert [(e.state.y, e.state.r) for e in eqs] == pytest.approx(
            [(e.state.y, e.state.r) for e in cold], abs=1e-9)


@pytest.mark.parametrize("values", [(1.0, 1.1, 1.05), (1.0, 1.0, 1.1), (1.0,)])
def test_sweep_values_must_be_strictly_monotone(kaldor, values):
    with pytest.raises(ValueError):
        SweepSpec("MonetaryMS", values, kaldor)


def test_sweep_rejects_slow_parameter(kaldor):
    with pytest.raises(ValueError):
        SweepSpec("Slow", (1.0, 2.0), kaldor)


def test_settle_reaches_stable_equilibrium():
    cfg = kaldor_with(m_s=0.6)
    (eq,) = find_equilibria(cfg)
    st, ok = settle(State(eq.state.y + 0.2, eq.state.r - 0.1), cfg, reduced=False)
    assert ok
    assert math.hypot(st.y - eq.state.y, st.r - eq.state.r) < 1e-6


def test_monotone_fast_curve_has_no_hysteresis():
    with pytest.raises(NoHysteresis):
        hysteresis_run(affine_config(), "Slow", [1.0, 1.5, 2.0, 1.5, 1.0])


def test_path_must_turn_once(kaldor):
    with pytest.raises(ValueError):
        hysteresis_run(kaldor, "Slow", [1.0, 2.0, 1.5, 1.8])


def test_coarse_slow_loop_brackets_the_folds(kaldor):
    fv = fold_values(cached_curve("kaldor", "IS"))
    step = 0.05
    up = list(np.round(np.arange(fv.low - 0.5, fv.high + 0.5, step), 10))
    res = hysteresis_run(kaldor, "Slow", up + up[-2::-1])
    assert 0 <= res.up_jump - fv.high <= 2 * step
    assert 0 <= fv.low - res.down_jump <= 2 * step
    assert res.width > 0
