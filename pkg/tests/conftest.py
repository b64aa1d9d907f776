"""Shared generators for randomized markets.

Every generator takes an explicit ``numpy.random.Generator`` so that a failing
case can be replayed from its seed.
"""

from __future__ import annotations

import numpy as np
import pytest

from exante_match.decisions import NaiveRule
from exante_match.information import Signal, full_disclosure, null_signal, partition_signal
from exante_match.model import MarketInstance, TieError, make_instance


def random_ubar(rng, n):
    return np.sort(rng.uniform(0.0, 10.0, size=n))[::-1] + np.arange(n, 0, -1) * 1e-3


def random_instance(rng, t_max=4, n_max=3, s_max=3, *, t=None, n=None, s=None,
                    common_priority=False, capacities="integer", utilities="rank") -> MarketInstance:
    t = t or int(rng.integers(1, t_max + 1))
    n = n or int(rng.integers(1, n_max + 1))
    S = s or int(rng.integers(1, s_max + 1))
    students = [f"s{k + 1}" for k in range(t)]
    programs = [f"p{p + 1}" for p in range(n)]
    states = [f"w{w + 1}" for w in range(S)]
    if common_priority:
        order = list(rng.permutation(students))
        priorities = {p: order for p in programs}
    else:
        priorities = {p: list(rng.permutation(students)) for p in programs}
    if capacities == "integer":
        caps = rng.integers(1, 3, size=n).astype(float)
    else:
        caps = np.round(rng.uniform(0.3, 2.5, size=n), 3)
    prior = rng.dirichlet(np.ones(S))
    if utilities == "rank":
        rankings = {s: [list(rng.permutation(programs)) for _ in range(S)] for s in students}
        return make_instance(students, programs, caps, priorities, states, prior,
                             rankings=rankings, rank_values=random_ubar(rng, n))
    matrix = rng.uniform(0.0, 10.0, size=(t, n, S))
    return make_instance(students, programs, caps, priorities, states, prior, utility_matrix=matrix)


def random_signal(rng, S, I_max=3) -> Signal:
    kind = rng.choice(["full", "null", "partition", "random", "random"])
    if kind == "full" and S <= I_max:
        return full_disclosure(S)
    if kind == "null":
        return null_signal(S)
    if kind == "partition" and S > 1:
        cells_of = rng.integers(0, min(S, I_max), size=S)
        cells = [list(np.flatnonzero(cells_of == c)) for c in np.unique(cells_of)]
        return partition_signal(cells, S)
    I = int(rng.integers(1, I_max + 1))
    return Signal(rng.dirichlet(np.ones(I), size=S))


def random_market(rng, *, signal="random", attempts=50, **kwargs):
    """(instance, signal profile, naive rule); redraws the rare instances with exact ties."""
    for _ in range(attempts):
        inst = random_instance(rng, **kwargs)
        if signal == "full":
            signals = tuple(full_disclosure(inst.n_states) for _ in range(inst.t))
        else:
            signals = tuple(random_signal(rng, inst.n_states) for _ in range(inst.t))
        try:
            return inst, signals, NaiveRule(inst, signals)
        except TieError:
            continue
    raise RuntimeError("could not draw a tie-free market")


def random_cutoff(rng, inst) -> np.ndarray:
    b = rng.uniform(0.0, inst.t, size=inst.n)
    snap = rng.random(inst.n) < 0.3
    b[snap] = np.round(b[snap])
    return b


@pytest.fixture
def rng(request):
    # one stream per test, derived from the test name so reruns are reproducible
    seed = sum(ord(c) * (j + 1) for j, c in enumerate(request.node.name))
    return np.random.default_rng(seed)


# acceptance criteria report one line each; the lines are repeated in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
