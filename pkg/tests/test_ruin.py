"""Ruin probabilities, penalties at ruin, deficit laws, classical brackets."""

import numpy as np
import pytest

from mmruin.claims import Exponential
from mmruin.model import RegimeModel
from mmruin.ruin import (
    RuinError, deficit_kernel, discounted_ruin, embedded_walk, gerber_shiu,
    jump_measure, ode_residual, penalty_deficit_band, penalty_exp_deficit,
    penalty_one, penalty_tabulated, pollaczek_khintchine, ruin_curve_csv,
    ruin_probability, survival,
)

# frozen oracle values, high-precision scalar route
PSI_B_0 = (0.64362887, 0.71274226)
PSI_B_2 = (0.33565411, 0.38396509)
DISC_A_HALF_0 = 0.359611796798
DISC_A_HALF_1 = 0.0999078939437


def psi_a(x):
    return 0.5 * np.exp(-x)


def test_ruin_closed_form_single_state(model_a):
    for x in (0.0, 1.0, 2.5, 5.0):
        assert ruin_probability(model_a, x)[0] == pytest.approx(psi_a(x), rel=1e-8)
        assert survival(model_a, x)[0] == pytest.approx(1 - psi_a(x), rel=1e-8)


def test_ruin_two_state_oracle(model_b):
    assert np.allclose(ruin_probability(model_b, 0.0), PSI_B_0, atol=1e-6)
    assert np.allclose(ruin_probability(model_b, 2.0), PSI_B_2, atol=1e-6)


def test_ruin_decreasing_and_ordered(model_b):
    xs = np.linspace(0.0, 8.0, 17)
    vals = np.stack([ruin_probability(model_b, x) for x in xs])
    assert np.all(np.diff(vals, axis=0) <= 1e-10)
    # the slow-premium state is always the riskier start
    assert np.all(vals[:, 1] >= vals[:, 0] - 1e-12)


def test_negative_drift_raises():
    bad = RegimeModel(
        q_matrix=((0.0,),),
        premiums=(1.0,),
        arrival_rates=(4.0,),
        state_claims=(Exponential(rate=2.0),),
    )
    with pytest.raises(RuinError):
        survival(bad, 1.0)


def test_discounted_ruin_oracle(model_a):
    assert discounted_ruin(model_a, 0.5, 0.0)[0, 0] == pytest.approx(
        DISC_A_HALF_0, abs=1e-9)
    assert discounted_ruin(model_a, 0.5, 1.0)[0, 0] == pytest.approx(
        DISC_A_HALF_1, abs=1e-9)


def test_discounted_ruin_reduces_to_classical(model_b):
    assert np.allclose(discounted_ruin(model_b, 0.0, 2.0) @ np.ones(2),
                       ruin_probability(model_b, 2.0), atol=1e-8)


def test_discounted_ruin_decreasing_in_q(model_b):
    x = 1.0
    vals = [discounted_ruin(model_b, q, x).sum(axis=1) for q in (0.0, 0.3, 1.0)]
    assert np.all(np.diff(np.stack(vals), axis=0) < 1e-12)


def test_gerber_shiu_unit_penalty_matches_discounted(model_a, model_b, model_c):
    # two independent formulas for the same quantity
    for m in (model_a, model_b, model_c):
        for x in (0.0, 0.8, 2.0, 5.0):
            gs = gerber_shiu(m, 0.4, x, penalty_one())
            disc = discounted_ruin(m, 0.4, x) @ np.ones(m.n_states)
            assert np.allclose(gs, disc, atol=1e-5)


def test_gerber_shiu_zero_discount_is_ruin(model_b):
    for x in (0.0, 1.5):
        assert np.allclose(gerber_shiu(model_b, 0.0, x, penalty_one()),
                           ruin_probability(model_b, x), atol=1e-6)


def test_gerber_shiu_exp_deficit_memoryless(model_a):
    # deficit given ruin is Exp(2); penalty e^{-alpha deficit} factorizes
    alpha = 1.0
    for x in (0.0, 1.2):
        got = gerber_shiu(model_a, 0.0, x, penalty_exp_deficit(alpha))[0]
        assert got == pytest.approx(psi_a(x) * 2.0 / (2.0 + alpha), rel=1e-6)


def test_gerber_shiu_band_penalty(model_a):
    a, b = 0.5, 1.5
    for x in (0.0, 1.0):
        got = gerber_shiu(model_a, 0.0, x, penalty_deficit_band(a, b))[0]
        expect = psi_a(x) * (np.exp(-2 * a) - np.exp(-2 * b))
        assert got == pytest.approx(expect, rel=1e-6)


def test_gerber_shiu_tabulated_penalty_interpolates(model_a):
    # a tabulated constant-1 surface reproduces the unit penalty
    knots = np.linspace(0.0, 30.0, 4)
    table = np.ones((4, 4))
    pen = penalty_tabulated(knots, knots, table)
    got = gerber_shiu(model_a, 0.0, 1.0, pen)[0]
    assert got == pytest.approx(psi_a(1.0), rel=1e-5)


def test_jump_measure_masses(model_c):
    nu = jump_measure(model_c)
    assert nu.mass(0, 0) == pytest.approx(1.0)
    assert nu.mass(1, 1) == pytest.approx(3.0)
    assert nu.mass(0, 1) == pytest.approx(1.0)  # switch claim with mass
    assert nu.mass(1, 0) == pytest.approx(0.0)  # switch without claim


def test_deficit_kernel_exponential_overshoot(model_a):
    x = 1.0
    kern = deficit_kernel(model_a, x, 0)
    assert kern.total_mass == pytest.approx(psi_a(x), rel=1e-6)
    # overshoot density: ruin mass times Exp(2)
    mid = len(kern.grid) // 3
    z = kern.grid[mid]
    assert kern.densities[0, mid] == pytest.approx(
        psi_a(x) * 2.0 * np.exp(-2.0 * z), rel=1e-5)


def test_deficit_kernel_state_attribution(model_c):
    kern = deficit_kernel(model_c, 1.0, 0)
    assert kern.total_mass == pytest.approx(
        float(ruin_probability(model_c, 1.0)[0]), abs=2e-6)
    assert np.all(kern.masses > 0)  # both arrival states reachable
    assert np.all(kern.densities >= -1e-12)


def test_deficit_kernel_csv(tmp_path, model_b):
    kern = deficit_kernel(model_b, 1.0, 1)
    path = tmp_path / "deficit.csv"
    kern.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "z,density_state_1,density_state_2"
    assert len(lines) == len(kern.grid) + 1
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(back[:, 0], kern.grid, atol=1e-9)


def test_pk_bracket_encloses_survival(model_a):
    for x in (0.0, 0.5, 2.0, 10.0):
        br = pollaczek_khintchine(model_a, x)
        phi = survival(model_a, x)[0]
        assert br.lower - 1e-12 <= phi <= br.upper + 1e-12
        assert br.width < 2e-3
        assert br.contains(phi)


def test_pk_bracket_heavy_tail(model_pareto):
    br0 = pollaczek_khintchine(model_pareto, 0.0)
    # survival at 0 is the drift share 1 - rho = 1/3
    assert br0.lower - 1e-12 <= 1.0 / 3.0 <= br0.upper
    br = pollaczek_khintchine(model_pareto, 5.0)
    assert br.upper < 1.0


def test_pk_requires_single_state(model_b):
    with pytest.raises((RuinError, ValueError)):
        pollaczek_khintchine(model_b, 1.0)


def test_ode_residual_small_on_benchmarks(model_a, model_b):
    xs = np.linspace(0.2, 6.0, 30)
    norm_a = float(np.max(ruin_probability(model_a, 0.2)))
    assert ode_residual(model_a, 0.0, None, xs) < 1e-3 * norm_a
    norm_b = float(np.max(ruin_probability(model_b, 0.2)))
    assert ode_residual(model_b, 0.0, None, xs) < 1e-2 * norm_b


def test_embedded_walk_structure(model_b, model_c):
    for m in (model_b, model_c):
        walk = embedded_walk(m)
        p = walk.transition
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0)
        # net profit: the stationary mix of increments drifts down
        assert walk.mean_descent > 0
        pi = walk.stationary
        assert float(pi @ walk.increment_means) == pytest.approx(
            -walk.mean_descent, rel=1e-10)


def test_embedded_walk_mc_maximum(model_a):
    walk = embedded_walk(model_a)
    x = 1.0
    est = walk.maximum_exceeds_mc(x, n=40_000, seed=3)
    assert abs(est.value - psi_a(x)) < 4 * est.se


def test_ruin_curve_csv_roundtrip(tmp_path, model_b):
    path = tmp_path / "curve.csv"
    xs = [0.0, 1.0, 2.0]
    ruin_curve_csv(model_b, xs, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,phi_1,phi_2"
    body = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(body[:, 0], xs)
    assert np.allclose(body[1, 1:], ruin_probability(model_b, 1.0), atol=1e-9)
