"""Independent checks: exhaustive outcome enumeration and seeded simulation.

Nothing here calls the demand or welfare code. Cutoff lotteries are rebuilt
from the two-point weighting formula, choice sets from raw priority ranks, and
every quantity is read off the enumerated joint outcomes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from exante_match.information import Signal
from exante_match.model import MarketInstance, MatchingError, rank, rank_continuum

DEFAULT_CAP = 2 * 10**6


class SupportTooLarge(MatchingError):
    pass


def two_point_weight(b_p: float, cutoff: int) -> float:
    """Probability that a program with ex-ante cutoff ``b_p`` uses deterministic ``cutoff``."""
    gap = cutoff - b_p
    if 0.0 <= gap <= 1.0:
        return b_p - (cutoff - 1)
    if -1.0 <= gap < 0.0:
        return 1.0 - (b_p - cutoff)
    return 0.0


def _independent_scenarios(inst: MarketInstance, b: np.ndarray):
    per_program = []
    for p in range(inst.n):
        opts = [(c, two_point_weight(float(b[p]), c)) for c in range(inst.t + 1)]
        per_program.append([(c, w) for c, w in opts if w > 0.0])
    for combo in itertools.product(*per_program):
        cutoff = tuple(c for c, _ in combo)
        weight = math.prod(w for _, w in combo)
        sets = tuple(
            frozenset(p for p in range(inst.n) if rank(inst, p, k) <= cutoff[p])
            for k in range(inst.t)
        )
        yield sets, weight


def _continuum_lottery(inst: MarketInstance, b: np.ndarray, k: int):
    # choice set is constant between consecutive admission thresholds of the student points
    cuts = {0.0, 1.0}
    for p in range(inst.n):
        edge = float(b[p]) - rank_continuum(inst, p, k, 0.0)
        if 0.0 < edge < 1.0:
            cuts.add(edge)
    cuts = sorted(cuts)
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        mid = 0.5 * (lo + hi)
        members = frozenset(p for p in range(inst.n) if rank_continuum(inst, p, k, mid) <= b[p])
        out.append((members, hi - lo))
    return out


def _continuum_scenarios(inst: MarketInstance, b: np.ndarray):
    lotteries = [_continuum_lottery(inst, b, k) for k in range(inst.t)]
    for combo in itertools.product(*lotteries):
        yield tuple(C for C, _ in combo), math.prod(w for _, w in combo)


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Exact joint distribution over (state, deterministic matching)."""

    inst: MarketInstance
    weights: np.ndarray  # (outcomes,)
    states: np.ndarray  # (outcomes,)
    matchings: np.ndarray  # (outcomes, t), -1 when unmatched

    def total(self) -> float:
        return float(self.weights.sum())

    def marginals(self) -> np.ndarray:
        inst = self.inst
        out = np.zeros((inst.t, inst.n + 1))
        for k in range(inst.t):
            cols = np.where(self.matchings[:, k] < 0, inst.n, self.matchings[:, k])
            np.add.at(out[k], cols, self.weights)
        return out

    def demand(self) -> np.ndarray:
        return self.marginals()[:, :-1].sum(axis=0)

    def utilities(self) -> np.ndarray:
        inst = self.inst
        out = np.zeros(inst.t)
        for k in range(inst.t):
            picks = self.matchings[:, k]
            vals = np.where(
                picks < 0,
                inst.unmatched_utility,
                inst.utilities.values[k, np.maximum(picks, 0), self.states],
            )
            out[k] = float(self.weights @ vals)
        return out

    def rank_distributions(self) -> np.ndarray:
        inst = self.inst
        out = np.zeros((inst.t, inst.n + 1))
        for k in range(inst.t):
            for w, s, p in zip(self.weights, self.states, self.matchings[:, k]):
                col = inst.n if p < 0 else inst.utilities.rankings[k][s].index(int(p))
                out[k, col] += w
        return out

    def by_matching(self) -> dict[tuple[int, ...], float]:
        agg: dict[tuple[int, ...], float] = {}
        for w, m in zip(self.weights, self.matchings):
            key = tuple(int(x) for x in m)
            agg[key] = agg.get(key, 0.0) + float(w)
        return agg


def enumerate_outcomes(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                       coupling: str = "independent", cap: int = DEFAULT_CAP) -> OutcomeDistribution:
    """Enumerate every (cutoff draw, state, signal realizations, choices) combination."""
    b = np.asarray(b, dtype=float)
    if coupling == "independent":
        scenarios = list(_independent_scenarios(inst, b))
    elif coupling == "continuum":
        scenarios = list(_continuum_scenarios(inst, b))
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    bound = len(scenarios) * inst.n_states * math.prod(s.n_realizations for s in signals)
    if bound > cap:
        raise SupportTooLarge(f"{bound} outcome tuples exceed the cap of {cap}")

    weights, states, matchings = [], [], []
    for sets, w_cut in scenarios:
        for s in range(inst.n_states):
            w_state = w_cut * inst.prior[s]
            if w_state == 0.0:
                continue
            for reals in itertools.product(*(range(sig.n_realizations) for sig in signals)):
                w = w_state * math.prod(sig.likelihood[s, i] for sig, i in zip(signals, reals))
                if w == 0.0:
                    continue
                options = []
                for k, (C, i) in enumerate(zip(sets, reals)):
                    if not C:
                        options.append([(-1, 1.0)])
                    else:
                        dist = rule.probs(k, C)[i, s]
                        options.append([(p, float(dist[p])) for p in range(inst.n) if dist[p] > 0.0])
                for picks in itertools.product(*options):
                    weights.append(w * math.prod(q for _, q in picks))
                    states.append(s)
                    matchings.append([p for p, _ in picks])
    return OutcomeDistribution(
        inst,
        np.array(weights),
        np.array(states, dtype=int),
        np.array(matchings, dtype=int).reshape(len(weights), inst.t),
    )


@dataclass(frozen=True)
class SimulationConfig:
    draws: int = 100_000
    seed: int = 0
    coupling: str = "independent"
    batch_size: int = 1 << 17

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.coupling not in ("independent", "continuum"):
            raise ValueError(f"unknown coupling {self.coupling!r}")


@dataclass(frozen=True, eq=False)
class SimulationReport:
    draws: int
    demand: np.ndarray
    demand_se: np.ndarray
    utilities: np.ndarray
    utilities_se: np.ndarray
    overflow_frequency: np.ndarray  # share of draws in which a program exceeds capacity
    unmatched: float

    def same_as(self, other: "SimulationReport") -> bool:
        return self.draws == other.draws and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("demand", "demand_se", "utilities", "utilities_se", "overflow_frequency")
        ) and self.unmatched == other.unmatched


def _decision_tables(inst: MarketInstance, signals, rule) -> list[np.ndarray]:
    """Cumulative choice probabilities ``cdf[k][mask, i, w, p]`` for every choice-set mask."""
    tables = []
    for k in range(inst.t):
        I = signals[k].n_realizations
        cdf = np.zeros((1 << inst.n, I, inst.n_states, inst.n))
        for mask in range(1, 1 << inst.n):
            C = frozenset(p for p in range(inst.n) if mask >> p & 1)
            cdf[mask] = np.cumsum(rule.probs(k, C), axis=-1)
        tables.append(cdf)
    return tables


def simulate(inst: MarketInstance, signals: Sequence[Signal], rule, b,
             cfg: SimulationConfig = SimulationConfig()) -> SimulationReport:
    """Draw cutoffs, states, signals and choices ``cfg.draws`` times and average.

    Draws are split into batches, each with its own child seed, and reduced in
    batch order, so the report depends only on ``(inputs, cfg)``.
    """
    b = np.asarray(b, dtype=float)
    t, n = inst.t, inst.n
    ranks = inst.ranks  # (n, t)
    tables = _decision_tables(inst, signals, rule)
    sig_cdf = [np.cumsum(s.likelihood, axis=1) for s in signals]
    floors = np.floor(b)
    fracs = b - floors
    weights = 1 << np.arange(n)

    n_batches = -(-cfg.draws // cfg.batch_size)
    children = np.random.SeedSequence(cfg.seed).spawn(n_batches)
    d_sum = np.zeros(n)
    d_sq = np.zeros(n)
    u_sum = np.zeros(t)
    u_sq = np.zeros(t)
    overflow = np.zeros(n)
    unmatched = 0.0
    remaining = cfg.draws
    for child in children:
        m = min(cfg.batch_size, remaining)
        remaining -= m
        rng = np.random.Generator(np.random.PCG64(child))
        if cfg.coupling == "independent":
            cut = floors[None, :] + (rng.random((m, n)) < fracs[None, :])
            admitted = ranks.T[None, :, :] <= cut[:, None, :]  # (m, t, n)
        else:
            e = rng.random((m, t))
            admitted = (ranks.T[None, :, :] - 1 + e[:, :, None]) <= b[None, None, :]
        state = rng.choice(inst.n_states, size=m, p=inst.prior)
        counts = np.zeros((m, n))
        for k in range(t):
            u = rng.random(m)
            real = (u[:, None] >= sig_cdf[k][state]).sum(axis=1)
            real = np.minimum(real, signals[k].n_realizations - 1)
            mask = admitted[:, k, :].astype(np.int64) @ weights
            v = rng.random(m)
            cdf = tables[k][mask, real, state]  # (m, n)
            pick = np.minimum((v[:, None] >= cdf).sum(axis=1), n - 1)
            matched = mask > 0
            counts[np.flatnonzero(matched), pick[matched]] += 1.0
            util = np.where(
                matched,
                inst.utilities.values[k, pick, state],
                inst.unmatched_utility,
            )
            u_sum[k] += util.sum()
            u_sq[k] += (util * util).sum()
            unmatched += float((~matched).sum())
        d_sum += counts.sum(axis=0)
        d_sq += (counts * counts).sum(axis=0)
        overflow += (counts > inst.capacities[None, :]).sum(axis=0)

    N = cfg.draws
    d_mean = d_sum / N
    u_mean = u_sum / N
    d_var = np.maximum(d_sq / N - d_mean**2, 0.0)
    u_var = np.maximum(u_sq / N - u_mean**2, 0.0)
    return SimulationReport(
        draws=N,
        demand=d_mean,
        demand_se=np.sqrt(d_var / N),
        utilities=u_mean,
        utilities_se=np.sqrt(u_var / N),
        overflow_frequency=overflow / N,
        unmatched=unmatched / N,
    )
