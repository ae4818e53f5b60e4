"""Tail approximations: exponential decay data, finite-time estimates,
heavy-tail asymptote, and the auto dispatcher."""

import math

import numpy as np
import pytest

from mmruin.asymptotics import (
    cramer_constant, finite_time_csv, finite_time_ruin, hoglund,
    loss_exponent, loss_exponent_derivatives, rate_function, segerdahl,
    segerdahl_data, subexp_asymptote, subexp_data,
)
from mmruin.claims import Pareto
from mmruin.model import RegimeModel
from mmruin.ruin import RuinError, ruin_probability

# frozen oracle values, high-precision scalar route
GAMMA_B = 0.3154488069075724
CRAMER_B = (0.62191846, 0.72769839)
RATE_A_V2 = 2.1010205144336442
MAXIMIZER_A_V2 = 1.183503419072274
TWIST_A_V2 = 0.449489742783178
PREFACTOR_A_V2 = 0.45175887
LOSS_RATES_A = {1.25: 1.25735931288, 1.5: 1.527864045, 3.0: 3.34314575051}
SUBEXP_BIG_C = 0.9990550535957503


def test_cramer_data_single_state(model_a):
    data = cramer_constant(model_a)
    assert data.gamma == pytest.approx(1.0, abs=1e-10)
    assert data.constants[0] == pytest.approx(0.5, rel=1e-6)
    # MC cross-estimate agrees within its own error bars
    assert abs(data.mc_constants[0] - 0.5) < 3 * data.mc_se[0] + 1e-12


def test_cramer_data_two_state(model_b):
    data = cramer_constant(model_b)
    assert data.gamma == pytest.approx(GAMMA_B, abs=1e-10)
    assert np.allclose(data.constants, CRAMER_B, atol=1e-6)
    assert np.all(data.constants > 0)


def test_cramer_approx_tail_accuracy(model_b):
    data = cramer_constant(model_b)
    for x in (15.0, 25.0):
        exact = ruin_probability(model_b, x)
        assert np.allclose(data.approx(x), exact, rtol=2e-3)


def test_loss_exponent_vanishes_at_gamma(model_a, model_b):
    assert loss_exponent(model_a, 1.0) == pytest.approx(0.0, abs=1e-10)
    assert loss_exponent(model_b, GAMMA_B) == pytest.approx(0.0, abs=1e-10)
    assert loss_exponent(model_a, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_loss_exponent_derivative_sign_structure(model_a):
    # decreasing at 0 (net profit), increasing at the adjustment root
    d0 = loss_exponent_derivatives(model_a, 0.0)[0]
    dg = loss_exponent_derivatives(model_a, 1.0)[0]
    assert d0 == pytest.approx(-0.5, abs=1e-8)
    assert dg == pytest.approx(1.0, abs=1e-8)


def test_rate_function_frozen_values(model_a):
    for v, expect in LOSS_RATES_A.items():
        rate, g = rate_function(model_a, v)
        assert rate == pytest.approx(expect, abs=1e-9)
        # maximizer solves the stationarity condition
        assert loss_exponent_derivatives(model_a, g)[0] == pytest.approx(v, abs=1e-8)
    rate, g = rate_function(model_a, 2.0)
    assert rate == pytest.approx(RATE_A_V2, abs=1e-10)
    assert g == pytest.approx(MAXIMIZER_A_V2, abs=1e-8)


def test_rate_function_matches_grid_supremum(model_a):
    v = 1.7
    rate, _ = rate_function(model_a, v)
    alphas = np.linspace(0.0, 1.95, 4000)
    grid_sup = max(a * v - loss_exponent(model_a, a) for a in alphas)
    assert rate == pytest.approx(grid_sup, abs=1e-6)


def test_rate_function_convex(model_a):
    vs = np.linspace(1.1, 3.0, 9)
    rates = [rate_function(model_a, v)[0] for v in vs]
    assert np.all(np.diff(rates, 2) > -1e-9)


def test_segerdahl_data_single_state(model_a):
    data = segerdahl_data(model_a)
    assert data.m == pytest.approx(1.0, abs=1e-8)
    assert data.c2 == pytest.approx(4.0, rel=1e-6)


def test_segerdahl_monotone_and_capped(model_a):
    data = segerdahl_data(model_a)
    x = 20.0
    vals = [segerdahl(model_a, x, t, data)[0][0] for t in (5.0, 15.0, 25.0, 60.0)]
    assert np.all(np.diff(vals) >= -1e-15)
    cap = data.constants[0] * math.exp(-data.gamma * x)
    assert vals[-1] <= cap * (1 + 1e-12)
    # late horizon: the time factor saturates at 1
    late = segerdahl(model_a, x, 500.0, data)[0][0]
    assert late == pytest.approx(cap, rel=1e-9)


def test_hoglund_below_threshold_returns_cramer(model_a):
    res = hoglund(model_a, 5.0, 100.0)  # v = 0.05, well under the knee
    assert res.regime == "cramer"
    assert res.values[0] == pytest.approx(0.5 * math.exp(-5.0), rel=1e-6)


def test_hoglund_large_deviations_data(model_a):
    t = 8.0
    res = hoglund(model_a, 2.0 * t, t)  # v = 2
    assert res.regime == "large-deviations"
    d = res.data
    assert d.rate == pytest.approx(RATE_A_V2, abs=1e-9)
    assert d.gamma_v == pytest.approx(MAXIMIZER_A_V2, abs=1e-8)
    assert d.gamma_tilde == pytest.approx(TWIST_A_V2, abs=1e-8)
    assert d.prefactor[0] == pytest.approx(PREFACTOR_A_V2, abs=1e-6)
    expect = d.prefactor[0] * math.exp(-d.rate * t) / math.sqrt(t)
    assert res.values[0] == pytest.approx(expect, rel=1e-12)


def test_hoglund_segerdahl_overlap_corridor(model_a):
    # both approximations stay within 20 percent of each other just above
    # the typical velocity
    x = 40.0
    seg_data = segerdahl_data(model_a)
    for v in (1.02, 1.06, 1.1):
        t = x / v
        sval = segerdahl(model_a, x, t, seg_data)[0][0]
        hval = hoglund(model_a, x, t).values[0]
        assert sval == pytest.approx(hval, rel=0.2)


def test_subexp_data_pareto(model_pareto):
    data = subexp_data(model_pareto)
    assert data.abar == pytest.approx(1.0 / 3.0, rel=1e-10)
    assert data.big_c == pytest.approx(SUBEXP_BIG_C, rel=1e-6)
    assert data.c[0] == pytest.approx(SUBEXP_BIG_C, rel=1e-6)
    assert data.reference.label() == "Pareto"


def test_subexp_asymptote_equal_components():
    two = RegimeModel(
        q_matrix=((-1.0, 1.0), (1.0, -1.0)),
        premiums=(2.0, 1.0),
        arrival_rates=(1.0, 1.0),
        state_claims=(Pareto(shape=2.5, scale=1.0), Pareto(shape=2.5, scale=1.0)),
    )
    vals = subexp_asymptote(two, 40.0)
    assert vals.shape == (2,)
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)
    assert vals[0] > 0


def test_subexp_asymptote_decreasing(model_pareto):
    xs = np.array([5.0, 20.0, 80.0, 320.0])
    vals = subexp_asymptote(model_pareto, xs)[:, 0]
    assert np.all(np.diff(vals) < 0)


def test_subexp_refuses_light_tails(model_a):
    with pytest.raises(RuinError):
        subexp_data(model_a)


def test_finite_time_dispatch_tags(model_a, model_pareto):
    assert finite_time_ruin(model_a, 5.0, 6.0, n=2000).method == "segerdahl"
    assert finite_time_ruin(model_a, 40.0, 5.0, n=2000).method == "hoglund"
    assert finite_time_ruin(model_a, 0.0, 2.0, n=2000).method == "mc"
    assert finite_time_ruin(model_pareto, 3.0, 2.0, n=2000).method == "mc"
    # very late horizons saturate to the infinite-horizon value analytically
    late = finite_time_ruin(model_a, 2.0, 1e9, n=2000)
    assert late.method == "segerdahl"
    assert late.values[0] == pytest.approx(0.5 * math.exp(-2.0), rel=1e-8)


def test_finite_time_explicit_method(model_a):
    res = finite_time_ruin(model_a, 3.0, 50.0, method="mc", n=20_000)
    assert res.method == "mc"
    exact = segerdahl(model_a, 3.0, 50.0)[0][0]
    se = res.detail.se[0] if hasattr(res.detail, "se") else 0.01
    assert abs(res.values[0] - exact) < max(4 * se, 0.02)


def test_finite_time_csv_schema(tmp_path, model_a):
    path = tmp_path / "ft.csv"
    finite_time_csv(model_a, [(2.0, 4.0), (30.0, 4.0)], path, n=2000)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,t,method,value_1"
    assert len(lines) == 3
    assert lines[1].split(",")[2] in {"segerdahl", "hoglund", "mc"}
