"""Shared fixtures: the benchmark models used across the suite."""

import numpy as np
import pytest

from mmruin.claims import Erlang, Exponential, Pareto
from mmruin.model import RegimeModel


@pytest.fixture(scope="session")
def model_a():
    # single state, unit premium and arrival rate, mean-1/2 exponential claims;
    # every quantity has a closed form, which the oracles below pin down
    return RegimeModel(
        q_matrix=((0.0,),),
        premiums=(1.0,),
        arrival_rates=(1.0,),
        state_claims=(Exponential(rate=2.0),),
    )


@pytest.fixture(scope="session")
def model_b():
    # two symmetric switching states, unequal premiums, mean-1 claims
    return RegimeModel(
        q_matrix=((-1.0, 1.0), (1.0, -1.0)),
        premiums=(2.0, 1.0),
        arrival_rates=(1.0, 1.0),
        state_claims=(Exponential(rate=1.0), Exponential(rate=1.0)),
    )


@pytest.fixture(scope="session")
def model_c():
    # asymmetric generator with a claim attached to the 0 -> 1 switch;
    # exercises the transition-claim paths that the benchmarks never touch
    return RegimeModel(
        q_matrix=((-1.0, 1.0), (2.0, -2.0)),
        premiums=(2.0, 1.0),
        arrival_rates=(1.0, 3.0),
        state_claims=(Exponential(rate=1.0), Erlang(shape=2, rate=4.0)),
        transition_claims={(0, 1): Exponential(rate=2.0)},
    )


@pytest.fixture(scope="session")
def model_pareto():
    # heavy tail: survival (1+x)^-2.5, mean 2/3, no exponential moments
    return RegimeModel(
        q_matrix=((0.0,),),
        premiums=(1.0,),
        arrival_rates=(1.0,),
        state_claims=(Pareto(shape=2.5, scale=1.0),),
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
