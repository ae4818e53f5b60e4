"""Grace-period ruin: passage-time inversion, fixed point, asymptotics."""

import numpy as np
import pytest
from scipy.linalg import expm

from mmruin.parisian import (
    ParisianError, parisian_cramer, parisian_curve_csv, parisian_ruin,
    parisian_solution, parisian_subexp, parisian_survival, upcross_cdf,
)
from mmruin.ruin import deficit_kernel, jump_measure, ruin_probability, survival
from mmruin.scale import g_matrix, scale_operator
from mmruin.simulate import mc_parisian, mc_upcross_time

# frozen oracle values, fixed-point plus inversion route
S_A_Z1 = 0.78889804
RUIN_A_Z1 = {0.0: 0.211101961321, 1.0: 0.07766007, 2.0: 0.0285695437771}
RADIUS_A_Z1 = 0.3662045340648515
RUIN_B_Z1_X1 = (0.302574, 0.352683)
RUIN_B_ZHALF_X2 = (0.266554, 0.309929)
RADIUS_B_Z1 = 0.409256
UPCROSS_A = 0.78927  # z = 0.5, zeta = 1
CRAMER_A_Z1 = 0.21110774
CRAMER_A_ZQUARTER = 0.391053
CRAMER_B_ZHALF = (0.49895039, 0.58381511)


def test_upcross_zero_level_is_identity(model_a, model_b):
    for m in (model_a, model_b):
        assert np.allclose(upcross_cdf(m, 0.0, 1.0), np.eye(m.n_states))


def test_upcross_beyond_fluid_bound_is_zero(model_b):
    # max premium 2: level 5 is unreachable in time 2
    assert np.allclose(upcross_cdf(model_b, 5.0, 2.0), 0.0)
    assert np.allclose(upcross_cdf(model_b, 4.0 + 1e-9, 2.0), 0.0)


def test_upcross_frozen_value(model_a):
    info = {}
    got = upcross_cdf(model_a, 0.5, 1.0, info=info)[0, 0]
    assert info["method"] == "spectral"
    assert got == pytest.approx(UPCROSS_A, abs=1e-5)


def test_upcross_matrix_is_substochastic(model_b):
    for z, zeta in ((0.3, 0.5), (0.8, 0.7), (1.5, 1.0)):
        mat = upcross_cdf(model_b, z, zeta)
        assert np.all(mat >= -1e-9)
        assert np.all(mat.sum(axis=1) <= 1.0 + 1e-9)


def test_upcross_monotone_in_delay_and_level(model_a):
    zetas = (0.4, 0.8, 1.6)
    vals = [upcross_cdf(model_a, 0.5, zz)[0, 0] for zz in zetas]
    assert np.all(np.diff(vals) > 0)
    levels = (0.2, 0.5, 0.9)
    vals_z = [upcross_cdf(model_a, zz, 1.0)[0, 0] for zz in levels]
    assert np.all(np.diff(vals_z) < 0)


def test_upcross_fluid_atom(model_a):
    # a claim-free climb needs exactly z / p units of time and has
    # probability e^{-rate z / p}; the CDF jumps by that mass there
    z = 1.0
    atom = np.exp(-1.0)
    below = upcross_cdf(model_a, z, 0.998)[0, 0]
    above = upcross_cdf(model_a, z, 1.002)[0, 0]
    assert above - below == pytest.approx(atom, abs=3e-3)
    assert above >= atom - 1e-6


def test_upcross_spectral_agrees_with_mc(model_a):
    spectral = upcross_cdf(model_a, 0.5, 1.0)[0, 0]
    info = {}
    mc = upcross_cdf(model_a, 0.5, 1.0, method="mc", n=40_000, info=info)[0, 0]
    assert info["method"] == "mc"
    se = info["se"][0, 0]
    assert abs(spectral - mc) < 3 * se + 1e-9


def test_upcross_time_simulator_consistency(model_a):
    # empirical passage-time CDF from raw samples matches the inversion
    z, zeta = 0.5, 1.0
    samples = mc_upcross_time(model_a, 0.0, z, n=40_000, seed=5)
    frac = float(np.mean(samples["times"] <= zeta))
    se = np.sqrt(frac * (1 - frac) / samples["n"])
    exact = upcross_cdf(model_a, z, zeta)[0, 0]
    assert abs(frac - exact) < 3 * se
    # the fluid atom shows up as repeated exact values z / p
    assert np.min(samples["times"]) == pytest.approx(z / 1.0, abs=1e-12)


def test_parisian_solution_structure(model_a, model_b):
    sol_a = parisian_solution(model_a, 1.0)
    assert sol_a.s[0] == pytest.approx(S_A_Z1, abs=1e-6)
    assert sol_a.diagnostics["spectral_radius"] == pytest.approx(
        RADIUS_A_Z1, abs=1e-8)
    assert sol_a.diagnostics["quadrature_error"] < 1e-5

    sol_b = parisian_solution(model_b, 1.0)
    assert sol_b.diagnostics["spectral_radius"] == pytest.approx(
        RADIUS_B_Z1, abs=1e-5)
    # survival bracket: s between classical survival at 0 and 1
    assert np.all(sol_b.s >= sol_b.survival0 - 1e-12)
    assert np.all(sol_b.s <= 1.0 + 1e-12)


def test_kernel_row_sums_below_ruin_mass(model_b):
    # the recovery kernel moves at most the classical deficit mass
    sol = parisian_solution(model_b, 1.0)
    rows = sol.kernel.sum(axis=1)
    cap = ruin_probability(model_b, 0.0)
    assert np.all(rows <= cap + 1e-9)
    assert np.all(rows > 0)


def test_parisian_ruin_frozen_single_state(model_a):
    sol = parisian_solution(model_a, 1.0)
    for x, expect in RUIN_A_Z1.items():
        got = parisian_ruin(model_a, 1.0, x, sol)[0]
        assert got == pytest.approx(expect, abs=2e-6)


def test_parisian_ruin_frozen_two_state(model_b):
    got = parisian_ruin(model_b, 1.0, 1.0)
    assert np.allclose(got, RUIN_B_Z1_X1, atol=2e-6)
    got2 = parisian_ruin(model_b, 0.5, 2.0)
    assert np.allclose(got2, RUIN_B_ZHALF_X2, atol=2e-6)


def test_parisian_zero_delay_is_classical(model_a, model_b):
    for m in (model_a, model_b):
        assert np.allclose(parisian_survival(m, 0.0, 1.5), survival(m, 1.5))
        small = parisian_ruin(m, 0.002, 1.0)
        assert np.allclose(small, ruin_probability(m, 1.0), atol=1e-3)


def test_parisian_monotone_in_delay(model_b):
    x = 1.0
    ruins = [parisian_ruin(model_b, zz, x) for zz in (0.25, 0.5, 1.0, 2.0)]
    diffs = np.diff(np.stack(ruins), axis=0)
    assert np.all(diffs < 0)


def test_parisian_below_classical_everywhere(model_b):
    sol = parisian_solution(model_b, 1.0)
    for x in np.linspace(0.0, 6.0, 13):
        par = parisian_ruin(model_b, 1.0, x, sol)
        cls = ruin_probability(model_b, x)
        assert np.all(par <= cls + 1e-10)


def test_parisian_survival_monotone_in_x(model_b):
    sol = parisian_solution(model_b, 1.0)
    vals = np.stack([sol.evaluate(x) for x in (0.0, 1.0, 2.5, 5.0)])
    assert np.all(np.diff(vals, axis=0) > -1e-10)


def test_parisian_matches_mc(model_a):
    sol = parisian_solution(model_a, 1.0)
    est = mc_parisian(model_a, 1.0, 1.0, n=40_000, seed=11)[0]
    exact = parisian_ruin(model_a, 1.0, 1.0, sol)[0]
    assert abs(est.value - exact) < 3 * est.se


def test_laplace_identity_of_upcross_transform(model_b):
    # theta-transform consistency: integrating the deficit kernel against
    # exp(G y) must reproduce the double integral of the occupation density
    # against the jump density and exp(G y)
    x = 1.0
    op = scale_operator(model_b, 0.0)
    nu = jump_measure(model_b)
    nst = model_b.n_states

    gl_nodes, gl_wts = np.polynomial.legendre.leggauss(48)

    def panels(segments):
        ys_all, ws_all = [], []
        for lo, hi in segments:
            n_panels = max(2, int(np.ceil((hi - lo) * 4)))
            edges = np.linspace(lo, hi, n_panels + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * np.diff(edges)
            ys_all.append((mid[:, None] + half[:, None] * gl_nodes[None, :]).ravel())
            ws_all.append((half[:, None] * gl_wts[None, :]).ravel())
        return np.concatenate(ys_all), np.concatenate(ws_all)

    for theta in (0.3, 1.0, 2.5):
        g = g_matrix(model_b, theta)

        # left side: deficit law of (y, state) propagated by exp(G y)
        ys, ws = panels([(0.0, 40.0)])
        dens = np.stack([deficit_kernel(model_b, x, i, grid=ys).densities
                         for i in range(nst)])  # (i, k, node)
        eg = np.stack([expm(g * y) for y in ys])  # (node, k, j)
        lhs = np.einsum("n,ikn,nkj->ij", ws, dens, eg) / theta

        # right side: occupation density at z, jump from z + y, then exp(G y);
        # the occupation density has a kink at z = x, so split there
        zs, wz = panels([(0.0, x), (x, 25.0)])
        u = op.potential_density(x, zs)  # (node, i, a)
        rhs = np.zeros((nst, nst))
        for (a, b, w, law) in nu.entries:
            pdf = law.pdf(zs[:, None] + ys[None, :])  # (z, y)
            inner = np.einsum("m,zm,mj->zj", ws, pdf, eg[:, b, :])  # (z, j)
            rhs += w * np.einsum("zi,zj->ij", u[:, :, a] * wz[:, None], inner)
        rhs /= theta

        assert np.max(np.abs(lhs - rhs)) < 1e-5


def test_parisian_cramer_frozen(model_a, model_b):
    pc = parisian_cramer(model_a, 1.0)
    assert pc.constants[0] == pytest.approx(CRAMER_A_Z1, abs=1e-5)
    assert pc.fit_drift < 0.05
    pc_quarter = parisian_cramer(model_a, 0.25)
    assert pc_quarter.constants[0] == pytest.approx(CRAMER_A_ZQUARTER, abs=1e-4)
    # shorter grace periods sit closer to the classical constant 0.5
    assert pc_quarter.constants[0] > pc.constants[0]
    assert pc.constants[0] < 0.5

    pc_b = parisian_cramer(model_b, 0.5)
    assert np.allclose(pc_b.constants, CRAMER_B_ZHALF, atol=1e-4)


def test_parisian_subexp_matches_classical_asymptote(model_pareto):
    from mmruin.asymptotics import subexp_asymptote
    for zeta in (0.5, 2.0):
        vals = parisian_subexp(model_pareto, 80.0, zeta)
        assert np.allclose(vals, subexp_asymptote(model_pareto, 80.0), rtol=1e-12)


def test_parisian_curve_csv_schema(tmp_path, model_b):
    path = tmp_path / "parisian.csv"
    parisian_curve_csv(model_b, 1.0, [0.0, 1.0, 2.0], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "zeta,x,ruin_1,ruin_2,kernel_radius"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert float(first[0]) == 1.0
    assert abs(float(first[2]) - parisian_ruin(model_b, 1.0, 0.0)[0]) < 1e-6


def test_parisian_solution_rejects_zero_delay(model_a):
    with pytest.raises(ValueError):
        parisian_solution(model_a, 0.0)
