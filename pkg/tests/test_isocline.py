import dataclasses
import math

import numpy as np
import pytest

from islm.econ_model import GridSpec, r_is
from islm.errors import FoldCountMismatch
from islm.isocline import Which, fold_points, fold_values, residual, trace_isocline

from conftest import cached_curve


def _lm_fold_y(cfg, i_s):
    """Y on LM at a given short rate for the three-phase families (d = e = 0)."""
    dem, sup = cfg.demand, cfg.supply
    cub = i_s**3 / 3 - 0.5 * (dem.p + dem.q) * i_s**2 + dem.p * dem.q * i_s
    return (cfg.m_s + (dem.kappa_l + sup.kappa_m) * cub) / (dem.l - sup.m)


def test_is_curve_stays_on_its_zero_set(kaldor):
    c = cached_curve("kaldor", "IS")
    assert np.max(np.abs(residual(Which.IS, c.y, c.r, kaldor))) < 1e-10


def test_is_folds_sit_at_kaldor_boundaries(kaldor):
    inv, s = kaldor.invest, kaldor.save.s
    half = math.acosh(math.sqrt(inv.a * inv.b / (s - inv.linear_slope))) / inv.b
    c = cached_curve("kaldor", "IS")
    f1, f2 = fold_points(c)
    assert f1.y == pytest.approx(inv.ym - half, abs=1e-8)
    assert f2.y == pytest.approx(inv.ym + half, abs=1e-8)
    fv = fold_values(c)
    assert fv.low == pytest.approx(float(r_is(inv.ym - half, kaldor)), abs=1e-9)
    assert fv.high == pytest.approx(float(r_is(inv.ym + half, kaldor)), abs=1e-9)


def test_is_arcs_alternate_stability():
    c = cached_curve("kaldor", "IS")
    assert [(a.label, a.stability) for a in c.arcs] == [
        ("A1", "Stable"), ("A2", "Unstable"), ("A3", "Stable")]
    assert c.arcs[0].start == 0 and c.arcs[-1].stop == len(c.points) - 1


def test_lm_folds_sit_at_phase_boundaries(three_phase):
    c = cached_curve("three_phase", "LM")
    f1, f2 = fold_points(c)
    shift = three_phase.mp - three_phase.pi_e
    assert f1.r == pytest.approx(three_phase.demand.p + shift, abs=1e-8)
    assert f2.r == pytest.approx(three_phase.demand.q + shift, abs=1e-8)
    fv = fold_values(c)
    assert fv.low == pytest.approx(_lm_fold_y(three_phase, three_phase.demand.q), abs=1e-8)
    assert fv.high == pytest.approx(_lm_fold_y(three_phase, three_phase.demand.p), abs=1e-8)


def test_lm_arcs_alternate_stability():
    c = cached_curve("three_phase", "LM")
    assert [a.stability for a in c.arcs] == ["Stable", "Unstable", "Stable"]


def test_fast_coordinate_increases_along_curve():
    c = cached_curve("three_phase", "LM")
    assert c.fast[-1] > c.fast[0]


def test_monotone_lm_has_no_folds(kaldor):
    c = trace_isocline(Which.LM, kaldor)
    assert c.folds == [] and [a.label for a in c.arcs] == ["Monotone"]
    with pytest.raises(FoldCountMismatch):
        fold_values(c)


@pytest.mark.parametrize("level", [1.0, 1.5, 2.0, 2.5, 3.0])
def test_horizontal_line_crossings_match_fold_window(kaldor, level):
    """A line R = level meets IS three times strictly between the folds, once outside."""
    c = cached_curve("kaldor", "IS")
    fv = fold_values(c)
    ys = np.linspace(0, 12, 120001)
    g = r_is(ys, kaldor) - level
    crossings = int(np.sum(np.sign(g[:-1]) != np.sign(g[1:])))
    expected = 3 if fv.low < level < fv.high else 1
    assert crossings == expected
    traced = int(np.sum(np.sign(c.r[:-1] - level) != np.sign(c.r[1:] - level)))
    assert traced == expected


def test_curve_is_clipped_to_window(kaldor):
    w = GridSpec(y_min=2.0, y_max=9.0, r_min=0.0, r_max=4.0)
    c = trace_isocline(Which.IS, kaldor, w)
    assert c.y.min() >= 2.0 - 1e-12 and c.y.max() <= 9.0 + 1e-12
    assert len(c.folds) == 2


def test_shifted_intercept_moves_fold_levels_only_vertically(kaldor):
    shifted = dataclasses.replace(kaldor, invest=dataclasses.replace(kaldor.invest, i0=3.2))
    a = fold_values(cached_curve("kaldor", "IS"))
    b = fold_values(trace_isocline(Which.IS, shifted))
    dr = (3.2 - kaldor.invest.i0) / (kaldor.invest.h + kaldor.save.g)
    assert (b.low - a.low, b.high - a.high) == pytest.approx((dr, dr), abs=1e-9)
