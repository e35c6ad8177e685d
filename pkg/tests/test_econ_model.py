import dataclasses
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from islm.econ_model import (
    GridSpec,
    ModelConfig,
    State,
    default_grid,
    default_kaldor,
    default_three_phase,
    eval_functions,
    fd_partials,
    kaldor_interval,
    partials,
    r_is,
    r_lm_roots,
    verify_conditions,
)
from islm.errors import DomainError, GridError, NoKaldorInterval

from conftest import kaldor_with

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

pos = st.floats(0.01, 5.0, allow_nan=False)


@st.composite
def configs(draw):
    base = draw(st.sampled_from([default_kaldor(), default_three_phase()]))
    return dataclasses.replace(
        base,
        alpha=draw(pos), beta=draw(pos),
        epsilon=draw(st.floats(0.0, 1.0)),
        m_s=draw(pos),
        invest=dataclasses.replace(base.invest, i0=draw(st.floats(-3, 6)), b=draw(pos)),
    )


@given(configs())
@settings(max_examples=60, deadline=None)
def test_config_json_round_trip_is_identity(cfg):
    assert ModelConfig.from_json(cfg.to_json()) == cfg


def test_shipped_configs_match_code_defaults():
    assert ModelConfig.load(CONFIGS / "default_kaldor.json") == default_kaldor()
    assert ModelConfig.load(CONFIGS / "default_three_phase.json") == default_three_phase()


@pytest.mark.parametrize("path", [("gamma",), ("invest", "slope"), ("demand", "kappa")])
def test_unknown_fields_are_rejected(path):
    doc = json.loads(default_kaldor().to_json())
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = 1.0
    with pytest.raises(ValueError, match=path[-1]):
        ModelConfig.from_dict(doc)


@pytest.mark.parametrize("field,value", [("alpha", 0.0), ("beta", -1.0), ("m_s", 0.0),
                                         ("epsilon", 1.5), ("epsilon", -0.1)])
def test_invalid_scalars_are_rejected(field, value):
    with pytest.raises(ValueError):
        kaldor_with(**{field: value})


def test_phase_bounds_must_be_ordered(kaldor):
    with pytest.raises(ValueError):
        dataclasses.replace(kaldor, demand=dataclasses.replace(kaldor.demand, p=3.0, q=2.0))


def test_negative_income_is_a_domain_error(kaldor):
    with pytest.raises(DomainError):
        State(-1e-9, 0.0)
    with pytest.raises(DomainError):
        eval_functions((np.array([1.0, -0.5]), np.array([0.0, 0.0])), kaldor)


def test_grid_rejects_degenerate_axes():
    with pytest.raises(GridError):
        GridSpec(ny=1)
    with pytest.raises(GridError):
        GridSpec(y_min=-1.0)


def test_short_rate_uses_policy_and_expected_inflation(kaldor):
    assert State(2.0, 1.5).short_rate(kaldor) == pytest.approx(1.5 - 0.01 + 0.02)


@pytest.mark.parametrize("make", [default_kaldor, default_three_phase])
def test_closed_form_partials_match_finite_differences(make, rng):
    cfg = make()
    g = default_grid(cfg)
    ys = rng.uniform(0.5, g.y_max, 400)
    rs = rng.uniform(g.r_min + 0.05, g.r_max, 400)
    cf, fd = partials((ys, rs), cfg), fd_partials((ys, rs), cfg)
    for key in cf:
        err = np.abs(cf[key] - fd[key]) / np.maximum(np.abs(cf[key]), 1.0)
        assert err.max() < 1e-6, key


def test_investment_slope_matches_hand_derivative(kaldor):
    inv = kaldor.invest
    y, r = 5.3, 2.0
    expected = inv.a * inv.b / math.cosh(inv.b * (y - inv.ym)) ** 2 + inv.linear_slope
    assert float(partials((y, r), kaldor)["I_Y"]) == pytest.approx(expected, rel=1e-14)


def test_three_phase_rate_slopes_vanish_at_phase_boundaries(three_phase):
    for i_s in (three_phase.demand.p, three_phase.demand.q):
        r = i_s + three_phase.mp - three_phase.pi_e
        p = partials((7.0, r), three_phase)
        assert abs(float(p["L_R"])) < 1e-12 and abs(float(p["M_R"])) < 1e-12


def test_kaldor_interval_matches_acosh_oracle(kaldor):
    inv, s = kaldor.invest, kaldor.save.s
    half = math.acosh(math.sqrt(inv.a * inv.b / (s - inv.linear_slope))) / inv.b
    X, Z = kaldor_interval(kaldor)
    assert X == pytest.approx(inv.ym - half, abs=1e-10)
    assert Z == pytest.approx(inv.ym + half, abs=1e-10)


def test_kaldor_interval_bisection_oracle(kaldor):
    def diff(y):
        p = partials((y, 0.0), kaldor)
        return float(p["I_Y"] - p["S_Y"])

    lo, hi = 0.0, kaldor.invest.ym
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if diff(mid) < 0 else (lo, mid)
    assert kaldor_interval(kaldor)[0] == pytest.approx(0.5 * (lo + hi), abs=1e-10)


def test_flat_investment_has_no_kaldor_interval(kaldor):
    weak = dataclasses.replace(kaldor, invest=dataclasses.replace(kaldor.invest, a=0.2))
    with pytest.raises(NoKaldorInterval):
        kaldor_interval(weak)


def test_is_graph_solves_goods_equation(kaldor, rng):
    ys = rng.uniform(0, 12, 50)
    I, S, _, _ = eval_functions((ys, r_is(ys, kaldor)), kaldor)
    assert np.max(np.abs(I - S)) < 1e-12


def test_lm_roots_solve_money_equation(three_phase):
    roots = r_lm_roots(8.0, three_phase)
    assert len(roots) == 3
    for r in roots:
        _, _, L, M = eval_functions((8.0, r), three_phase)
        assert abs(L - M - three_phase.m_s) < 1e-10


@pytest.mark.parametrize("make", [default_kaldor, default_three_phase])
def test_defaults_pass_verification(make):
    rep = verify_conditions(make())
    assert rep.passed, rep.violated_conditions()
    assert rep.fd_max_rel_error < 1e-6
    assert rep.intersection_ok


def test_three_phase_report_counts_both_phases(three_phase):
    rep = verify_conditions(three_phase)
    assert rep.nodes_inner_phase > 0 and rep.nodes_outer_phase > 0


def test_saving_propensity_above_one_is_flagged(kaldor):
    bad = dataclasses.replace(kaldor, save=dataclasses.replace(kaldor.save, s=1.2))
    assert "4" in verify_conditions(bad).violated_conditions()


def test_inverted_money_supply_slope_is_flagged(kaldor):
    bad = dataclasses.replace(kaldor, supply=dataclasses.replace(kaldor.supply, m=0.7))
    assert "10" in verify_conditions(bad).violated_conditions()


def test_is_below_lm_at_origin_breaks_intersection(kaldor):
    low = dataclasses.replace(kaldor, invest=dataclasses.replace(kaldor.invest, i0=-3.0))
    assert "13" in verify_conditions(low).violated_conditions()


def test_three_phase_grid_must_keep_short_rate_positive(three_phase):
    with pytest.raises(GridError):
        verify_conditions(three_phase, GridSpec())


def test_report_serializes_to_json(kaldor):
    doc = verify_conditions(kaldor).to_dict()
    assert json.loads(json.dumps(doc))["violations"] == []
