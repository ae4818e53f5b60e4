"""Model container, validation, stationary law, and drift bookkeeping."""

import numpy as np
import pytest

from mmruin.claims import Exponential, Pareto
from mmruin.model import (
    DriftReport, ModelValidationError, RegimeModel, drift_report,
    stationary_distribution, validate_model,
)


def test_valid_models_pass(model_a, model_b, model_c, model_pareto):
    for m in (model_a, model_b, model_c, model_pareto):
        assert validate_model(m) == []
        assert m.validated() is not None


def test_validation_collects_every_problem():
    bad = RegimeModel(
        q_matrix=((-1.0, 0.5), (1.0, -1.0)),  # row 0 sums to -0.5
        premiums=(1.0, -2.0),  # negative premium
        arrival_rates=(1.0, 1.0),
        state_claims=(Exponential(rate=1.0), Exponential(rate=1.0)),
    )
    problems = validate_model(bad)
    assert len(problems) >= 2
    joined = " | ".join(problems)
    assert "sum to zero" in joined
    assert "premium" in joined


def test_validated_raises_with_all_problems():
    bad = RegimeModel(
        q_matrix=((-1.0, 0.5), (1.0, -1.0)),
        premiums=(1.0, -2.0),
        arrival_rates=(1.0, 1.0),
        state_claims=(Exponential(rate=1.0), Exponential(rate=1.0)),
    )
    with pytest.raises(ModelValidationError) as err:
        bad.validated()
    assert len(err.value.problems) >= 2


def test_stationary_distribution_b(model_b):
    pi = stationary_distribution(model_b.q())
    assert pi == pytest.approx([0.5, 0.5], abs=1e-12)
    assert np.allclose(pi @ model_b.q(), 0.0, atol=1e-12)


def test_stationary_distribution_asymmetric(model_c):
    pi = stationary_distribution(model_c.q())
    # balance: pi_0 * 1 = pi_1 * 2
    assert pi == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-12)


def test_drift_report_values(model_a, model_b):
    rep_a = drift_report(model_a)
    assert isinstance(rep_a, DriftReport)
    assert rep_a.stationary_drift == pytest.approx(0.5, abs=1e-12)

    rep_b = drift_report(model_b)
    # premiums (2, 1), load 1 per state: instantaneous drifts (1, 0)
    assert rep_b.instantaneous == pytest.approx([1.0, 0.0], abs=1e-12)
    assert rep_b.stationary_drift == pytest.approx(0.5, abs=1e-12)


def test_drift_counts_transition_claims(model_c):
    rep = drift_report(model_c)
    pi = stationary_distribution(model_c.q())
    manual = float(
        pi @ (model_c.p()
              - model_c.lam() * np.array([law.mean for law in model_c.state_claims])
              - np.array([1.0 * 0.5, 0.0])))  # q_01 = 1, switch claim mean 1/2
    assert rep.stationary_drift == pytest.approx(manual, abs=1e-12)
    assert rep.stationary_drift > 0


def test_heavy_and_rational_flags(model_a, model_pareto):
    assert not model_a.heavy_tailed
    assert model_a.rational
    assert model_pareto.heavy_tailed
    assert not model_pareto.rational
    assert model_pareto.mgf_abscissa == 0.0


def test_switch_claim_defaults_to_zero_jump(model_b):
    law = model_b.switch_claim(0, 1)
    assert law.mean == 0.0
    assert float(law.transform(3.0)) == pytest.approx(1.0)


def test_cache_key_stable(model_b):
    assert model_b.cache_key() == model_b.cache_key()
    other = RegimeModel(
        q_matrix=model_b.q_matrix,
        premiums=(2.0, 1.0),
        arrival_rates=(1.0, 1.0),
        state_claims=(Exponential(rate=1.0), Exponential(rate=1.0)),
    )
    assert other.cache_key() == model_b.cache_key()


def test_net_profit_violation_reported():
    # load rho = lam * mean / p = 2 > 1: drift negative
    bad = RegimeModel(
        q_matrix=((0.0,),),
        premiums=(1.0,),
        arrival_rates=(4.0,),
        state_claims=(Exponential(rate=2.0),),
    )
    rep = drift_report(bad)
    assert rep.stationary_drift < 0
