"""Built-in example markets.

``ex_a``
    four students and four unit-capacity programs with heterogeneous
    priorities, three states (30/40/30), where a coarse common partition
    ``({w1}, {w2, w3})`` Pareto dominates full disclosure.
``ex_b``
    two students, two unit-capacity programs, common priority s1 > s2, two
    states; no deterministic cutoff clears this market.
``ex_c``
    the same two-student market, used to illustrate a matching as a lottery
    over deterministic matchings at a cutoff mixing (1, 2) and (2, 2).
"""

from __future__ import annotations

import numpy as np

from exante_match.information import full_disclosure, null_signal, partition_signal, uniform_profile
from exante_match.model import MarketInstance, make_instance

EX_A_PRIORITIES = {
    "p1": ["s3", "s2", "s1", "s4"],
    "p2": ["s2", "s1", "s3", "s4"],
    "p3": ["s1", "s3", "s2", "s4"],
    "p4": ["s4", "s1", "s2", "s3"],
}

# s2 is only pinned down at the top; the rest of her ranking is filled in program order
EX_A_RANKINGS = {
    "s1": [["p1", "p4", "p2", "p3"], ["p2", "p3", "p1", "p4"], ["p3", "p2", "p1", "p4"]],
    "s2": [["p2"], ["p1"], ["p1"]],
    "s3": [["p3", "p1", "p2", "p4"]] * 3,
    "s4": [["p4", "p3", "p1", "p2"]] * 3,
}

TWO_BY_TWO_RANKINGS = {
    "s1": [["p1", "p2"], ["p2", "p1"]],
    "s2": [["p1", "p2"], ["p1", "p2"]],
}


def ex_a(rank_values=(4.0, 3.0, 2.0, 1.0)) -> tuple[MarketInstance, dict[str, tuple]]:
    inst = make_instance(
        students=["s1", "s2", "s3", "s4"],
        programs=["p1", "p2", "p3", "p4"],
        capacities=[1, 1, 1, 1],
        priorities=EX_A_PRIORITIES,
        states=["w1", "w2", "w3"],
        prior=[0.3, 0.4, 0.3],
        rankings=EX_A_RANKINGS,
        rank_values=rank_values,
    )
    signals = {
        "partition": uniform_profile(partition_signal([[0], [1, 2]], 3, ["w1", "w2|w3"]), 4),
        "full": uniform_profile(full_disclosure(3, ["w1", "w2", "w3"]), 4),
    }
    return inst, signals


def _two_by_two(prior, rank_values) -> tuple[MarketInstance, dict[str, tuple]]:
    inst = make_instance(
        students=["s1", "s2"],
        programs=["p1", "p2"],
        capacities=[1, 1],
        priorities={"p1": ["s1", "s2"], "p2": ["s1", "s2"]},
        states=["w1", "w2"],
        prior=prior,
        rankings=TWO_BY_TWO_RANKINGS,
        rank_values=rank_values,
    )
    signals = {
        "full": uniform_profile(full_disclosure(2, ["w1", "w2"]), 2),
        "null": uniform_profile(null_signal(2), 2),
    }
    return inst, signals


def ex_b(prior=(0.5, 0.5), rank_values=(2.0, 1.0)) -> tuple[MarketInstance, dict[str, tuple]]:
    return _two_by_two(prior, rank_values)


def ex_c(prior=(0.5, 0.5), rank_values=(2.0, 1.0)) -> tuple[MarketInstance, dict[str, tuple]]:
    return _two_by_two(prior, rank_values)


def ex_c_cutoff(weight_first: float) -> np.ndarray:
    """Ex-ante cutoff putting ``weight_first`` on (1, 2) and the rest on (2, 2)."""
    return weight_first * np.array([1.0, 2.0]) + (1.0 - weight_first) * np.array([2.0, 2.0])
