"""Shrinking property tests for the small pure pieces.

The market-level properties live next to each module and loop over seeded
random instances; these use hypothesis so a failure reduces to a minimal input.
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from exante_match.demand import choice_set_lottery, cutoff_distribution
from exante_match.information import (
    Signal,
    apply_garbling,
    belief_distribution,
    check_bayes_plausible,
    is_more_informative,
)
from exante_match.oracle import two_point_weight
from exante_match.scenario import Scenario, same_instance, scenario_from_dict, scenario_to_dict

from conftest import random_instance, random_signal

unit = st.floats(0.0, 1.0, allow_nan=False)


def stochastic(rows, cols):
    """Row-stochastic matrices, built from nonnegative weights with a floor so no row is all zero."""
    return st.lists(st.lists(st.floats(0.0, 1.0), min_size=cols, max_size=cols), min_size=rows, max_size=rows) \
        .map(lambda m: (np.array(m) + 1e-3) / (np.array(m) + 1e-3).sum(axis=1, keepdims=True))


@given(st.floats(0.0, 6.0, allow_nan=False))
def test_two_point_weights_are_a_distribution_with_mean_b(b):
    cutoffs = np.arange(0, 7)
    w = np.array([two_point_weight(b, int(c)) for c in cutoffs])
    assert np.all(w >= 0) and (w > 0).sum() <= 2
    assert abs(w.sum() - 1.0) <= 1e-12
    assert abs(w @ cutoffs - b) <= 1e-12


@given(st.lists(st.floats(0.0, 5.0, allow_nan=False), min_size=1, max_size=4))
def test_cutoff_distribution_matches_two_point_weights(b):
    dist = cutoff_distribution(b)
    for p, marg in enumerate(dist.marginals):
        for c, w in marg.items():
            assert abs(w - two_point_weight(b[p], c)) <= 1e-12


@given(st.lists(unit, min_size=1, max_size=5), st.sampled_from(["independent", "continuum"]))
def test_choice_set_lottery_marginals(theta, coupling):
    lot = choice_set_lottery(np.array(theta), coupling)
    marg = np.zeros(len(theta))
    for members, p in lot:
        assert p >= 0
        for q in members:
            marg[q] += p
    assert abs(sum(p for _, p in lot) - 1.0) <= 1e-12
    np.testing.assert_allclose(marg, theta, atol=1e-12)


@st.composite
def signal_and_garbling(draw):
    S = draw(st.integers(1, 3))
    I = draw(st.integers(1, 3))
    J = draw(st.integers(1, 3))
    return Signal(draw(stochastic(S, I))), draw(stochastic(I, J))


@given(signal_and_garbling())
@settings(max_examples=60, deadline=None)
def test_garbled_signal_is_less_informative(case):
    signal, garbling = case
    coarse = apply_garbling(signal, garbling)
    result = is_more_informative(signal, coarse)
    assert result.informative
    assert np.allclose(signal.likelihood @ result.garbling, coarse.likelihood, atol=1e-8)


@given(st.integers(1, 3).flatmap(lambda S: st.tuples(stochastic(1, S), stochastic(S, 3))))
@settings(max_examples=60, deadline=None)
def test_beliefs_average_to_the_prior(case):
    prior, likelihood = case
    assert check_bayes_plausible(belief_distribution(prior[0], Signal(likelihood)), prior[0])


@given(st.integers(0, 2**32 - 1), st.sampled_from(["rank", "matrix"]))
@settings(max_examples=40, deadline=None)
def test_scenario_round_trip_on_random_markets(seed, utilities):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, utilities=utilities, capacities="real")
    signals = {"a": tuple(random_signal(rng, inst.n_states) for _ in range(inst.t)),
               "b": (random_signal(rng, inst.n_states),) * inst.t}
    again = scenario_from_dict(scenario_to_dict(Scenario(inst, signals, {"seed": seed})))
    assert same_instance(inst, again.instance)
    for name, profile in signals.items():
        assert all(x.equals(y, 0.0) for x, y in zip(profile, again.signal(name)))
