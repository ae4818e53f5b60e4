"""Claim-law catalog: transforms, moments, tails, tilting, sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mmruin.claims import (
    Degenerate, Erlang, Exponential, HyperExponential, LogNormal, Pareto,
    PhaseType, TransformDomainError, Weibull,
)

LIGHT_LAWS = [
    Exponential(rate=2.0),
    Erlang(shape=3, rate=1.5),
    HyperExponential(weights=(0.4, 0.6), rates=(1.0, 3.0)),
    PhaseType(alpha=(0.7, 0.3), t_matrix=((-2.0, 1.0), (0.0, -3.0))),
]
HEAVY_LAWS = [
    Pareto(shape=2.5, scale=1.0),
    Weibull(shape=0.6, scale=1.0),
    LogNormal(mu=0.0, sigma=1.0),
]
ALL_LAWS = LIGHT_LAWS + HEAVY_LAWS


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.label())
def test_mean_matches_tail_integral(law):
    # E C = integral of the survival function
    hi = float(law.quantile(1.0 - 1e-12))
    val, _ = quad(law.sf, 0.0, hi, limit=200)
    assert val == pytest.approx(law.mean, rel=1e-6)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.label())
def test_transform_at_zero_is_one(law):
    assert float(law.transform(0.0)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.label())
def test_transform_derivative_at_zero_is_minus_mean(law):
    # heavy laws differentiate numerically, light ones analytically
    rel = 1e-10 if law.has_mgf else 1e-6
    assert float(law.transform_derivative(0.0)) == pytest.approx(-law.mean, rel=rel)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.label())
def test_transform_matches_quadrature(law):
    s = 0.7
    # e^{-su} makes anything past u = 80 invisible at double precision
    hi = min(float(law.quantile(1.0 - 1e-13)), 80.0)
    val, _ = quad(lambda u: math.exp(-s * u) * law.pdf(u), 0.0, hi,
                  limit=400, epsabs=1e-13, epsrel=1e-12)
    assert float(law.transform(s)) == pytest.approx(val, rel=1e-6)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.label())
def test_quantile_inverts_cdf(law):
    for u in (0.05, 0.5, 0.9, 0.999):
        x = float(law.quantile(u))
        assert float(law.cdf(x)) == pytest.approx(u, abs=1e-9)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.label())
def test_sampling_matches_mean(law, rng):
    draws = law.sample(rng, 200_000)
    assert draws.min() >= 0.0
    se = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - law.mean) < 5 * se


@pytest.mark.parametrize("law", LIGHT_LAWS, ids=lambda l: l.label())
def test_exponential_tilt_shifts_transform(law):
    theta = 0.4
    assert theta < law.mgf_abscissa
    tilted = law.tilt(theta)
    # tilted transform is a ratio of shifted originals
    for s in (0.3, 1.1):
        expect = float(law.transform(s - theta)) / float(law.transform(-theta))
        assert float(tilted.transform(s)) == pytest.approx(expect, rel=1e-9)


@pytest.mark.parametrize("law", HEAVY_LAWS, ids=lambda l: l.label())
def test_heavy_laws_refuse_tilt_and_mgf(law):
    assert not law.has_mgf
    with pytest.raises(TransformDomainError):
        law.mgf(0.5)
    with pytest.raises(TransformDomainError):
        law.tilt(0.5)


def test_mgf_domain_guard():
    law = Exponential(rate=2.0)
    assert float(law.mgf(1.0)) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(TransformDomainError):
        law.mgf(2.0)


def test_degenerate_law():
    law = Degenerate()
    assert law.mean == 0.0
    assert float(law.transform(5.0)) == 1.0
    assert law.sample(np.random.default_rng(0), 4).tolist() == [0.0] * 4


def test_integrated_tail_is_probability_tail():
    law = Pareto(shape=2.5, scale=1.0)
    # normalized equilibrium survival: (1+x)^-(shape-1)
    for x in (0.0, 1.0, 10.0):
        expect = (1.0 + x) ** (-1.5)
        assert float(law.integrated_tail_raw(x)) / law.mean == pytest.approx(expect, rel=1e-9)
        assert 1.0 - float(law.equilibrium_cdf(x)) == pytest.approx(expect, rel=1e-9)
    assert float(law.integrated_tail_raw(0.0)) == pytest.approx(law.mean, rel=1e-12)


def test_rational_transform_fractions_evaluate():
    for law in LIGHT_LAWS:
        frac = law.transform_fraction()
        assert frac is not None
        num, den = frac
        s = 0.9
        assert num(s) / den(s) == pytest.approx(float(law.transform(s)), rel=1e-10)
    assert Pareto(shape=2.5, scale=1.0).transform_fraction() is None


@settings(max_examples=40, deadline=None)
@given(rate=st.floats(0.2, 8.0))
def test_exponential_memoryless(rate):
    law = Exponential(rate=rate)
    assert float(law.sf(1.0)) * float(law.sf(2.0)) == pytest.approx(
        float(law.sf(3.0)), rel=1e-10)
    assert law.mean == pytest.approx(1.0 / rate)


@settings(max_examples=30, deadline=None)
@given(shape=st.integers(1, 6), rate=st.floats(0.3, 5.0))
def test_erlang_moments_and_transform(shape, rate):
    law = Erlang(shape=shape, rate=rate)
    assert law.mean == pytest.approx(shape / rate, rel=1e-12)
    s = 0.5
    assert float(law.transform(s)) == pytest.approx(
        (rate / (rate + s)) ** shape, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    w=st.floats(0.05, 0.95),
    r1=st.floats(0.3, 2.0),
    r2=st.floats(2.5, 9.0),
    s=st.floats(0.0, 1.0),
)
def test_hyperexponential_transform_is_mixture(w, r1, r2, s):
    law = HyperExponential(weights=(w, 1.0 - w), rates=(r1, r2))
    expect = w * r1 / (r1 + s) + (1.0 - w) * r2 / (r2 + s)
    assert float(law.transform(s)) == pytest.approx(expect, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(shape=st.floats(2.1, 6.0), x=st.floats(0.0, 50.0))
def test_pareto_tail_and_equilibrium_ordering(shape, x):
    law = Pareto(shape=shape, scale=1.0)
    # normalized equilibrium tail dominates the plain tail for heavy laws
    assert float(law.sf(x)) == pytest.approx((1.0 + x) ** (-shape), rel=1e-12)
    eq_tail = float(law.integrated_tail_raw(x)) / law.mean
    assert eq_tail >= float(law.sf(x)) - 1e-12
