"""Signals, Bayes posteriors, belief distributions and the Blackwell order."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from exante_match.linprog import LinearProgram, feasible
from exante_match.model import MatchingError

ROW_TOL = 1e-9
MERGE_TOL = 1e-9


class ZeroProbabilityRealization(MatchingError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Signal:
    """State-conditional likelihoods: ``likelihood[w, i] = P(realization i | state w)``."""

    likelihood: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.likelihood, dtype=float))
        object.__setattr__(self, "likelihood", L)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"i{j + 1}" for j in range(L.shape[1])))
        if len(self.labels) != L.shape[1]:
            raise ValueError("one label per realization required")
        if np.any(L < -ROW_TOL) or np.any(np.abs(L.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValueError("each likelihood row must be a probability vector")

    @property
    def n_states(self) -> int:
        return self.likelihood.shape[0]

    @property
    def n_realizations(self) -> int:
        return self.likelihood.shape[1]

    def realization_index(self, realization) -> int:
        if isinstance(realization, (int, np.integer)):
            if 0 <= realization < self.n_realizations:
                return int(realization)
            raise IndexError(f"realization {realization} out of range")
        return self.labels.index(realization)

    def marginal(self, prior) -> np.ndarray:
        return np.asarray(prior, dtype=float) @ self.likelihood

    def equals(self, other: "Signal", tol: float = 1e-12) -> bool:
        return self.likelihood.shape == other.likelihood.shape and bool(
            np.allclose(self.likelihood, other.likelihood, atol=tol, rtol=0)
        )


SignalProfile = tuple  # one Signal per student, in instance order


def uniform_profile(signal: Signal, t: int) -> tuple[Signal, ...]:
    return tuple(signal for _ in range(t))


@dataclass(frozen=True, eq=False)
class BeliefDistribution:
    beliefs: np.ndarray  # (support size, states)
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.beliefs


def posterior_matrix(prior, signal: Signal) -> tuple[np.ndarray, np.ndarray]:
    """All posteriors at once: rows indexed by realization, plus marginals.

    Rows for zero-marginal realizations are left as zeros.
    """
    prior = np.asarray(prior, dtype=float)
    joint = signal.likelihood.T * prior[None, :]  # (I, states)
    marg = joint.sum(axis=1)
    post = np.zeros_like(joint)
    pos = marg > 0
    post[pos] = joint[pos] / marg[pos, None]
    return post, marg


def posterior(prior, signal: Signal, realization) -> np.ndarray:
    i = signal.realization_index(realization)
    post, marg = posterior_matrix(prior, signal)
    if marg[i] <= 0:
        raise ZeroProbabilityRealization(f"realization {signal.labels[i]} has zero probability")
    return post[i]


def belief_distribution(prior, signal: Signal, merge_tol: float = MERGE_TOL) -> BeliefDistribution:
    post, marg = posterior_matrix(prior, signal)
    beliefs: list[np.ndarray] = []
    weights: list[float] = []
    for i in range(signal.n_realizations):
        if marg[i] <= 0:
            continue
        for j, mu in enumerate(beliefs):
            if np.max(np.abs(mu - post[i])) < merge_tol:
                weights[j] += marg[i]
                break
        else:
            beliefs.append(post[i])
            weights.append(float(marg[i]))
    return BeliefDistribution(np.array(beliefs), np.array(weights))


def check_bayes_plausible(dist: BeliefDistribution, prior, tol: float = 1e-9) -> bool:
    if np.any(dist.weights <= 0) or abs(dist.weights.sum() - 1.0) > tol:
        return False
    return bool(np.all(np.abs(dist.mean() - np.asarray(prior, dtype=float)) <= tol))


# constructors

def full_disclosure(n_states: int, labels: Sequence[str] | None = None) -> Signal:
    return Signal(np.eye(n_states), tuple(labels) if labels else ())


def null_signal(n_states: int) -> Signal:
    return Signal(np.ones((n_states, 1)), ("none",))


def partition_signal(cells: Sequence[Sequence[int]], n_states: int, labels: Sequence[str] | None = None) -> Signal:
    """0/1 signal revealing which cell of ``cells`` contains the state."""
    seen = sorted(w for cell in cells for w in cell)
    if seen != list(range(n_states)) or any(len(cell) == 0 for cell in cells):
        raise ValueError("cells must partition the states")
    L = np.zeros((n_states, len(cells)))
    for j, cell in enumerate(cells):
        L[list(cell), j] = 1.0
    return Signal(L, tuple(labels) if labels else ())


# Blackwell order

@dataclass(frozen=True, eq=False)
class BlackwellResult:
    informative: bool
    garbling: np.ndarray | None = None
    residual: float = 0.0

    def __bool__(self) -> bool:
        return self.informative


def garbling_program(fine: Signal, coarse: Signal) -> LinearProgram:
    """Feasibility system for ``coarse = fine @ T`` with T row-stochastic.

    Variables are ``T[i, j]`` flattened row-major.
    """
    if fine.n_states != coarse.n_states:
        raise ValueError("signals are defined over different state sets")
    I, J, S = fine.n_realizations, coarse.n_realizations, fine.n_states
    rows = []
    rhs = []
    for i in range(I):
        row = np.zeros(I * J)
        row[i * J:(i + 1) * J] = 1.0
        rows.append(row)
        rhs.append(1.0)
    for w in range(S):
        for j in range(J):
            row = np.zeros(I * J)
            row[j::J] = fine.likelihood[w]
            rows.append(row)
            rhs.append(coarse.likelihood[w, j])
    return LinearProgram(I * J, A_eq=np.array(rows), b_eq=np.array(rhs))


def is_more_informative(fine: Signal, coarse: Signal, tol: float = 1e-9) -> BlackwellResult:
    """Decide whether ``coarse`` is a garbling of ``fine``; return the garbling if so."""
    lp = garbling_program(fine, coarse)
    res = feasible(lp, tol=tol)
    if not res.success:
        return BlackwellResult(False, None, res.residual)
    T = res.x.reshape(fine.n_realizations, coarse.n_realizations)
    T = np.clip(T, 0.0, None)
    T /= T.sum(axis=1, keepdims=True)
    err = float(np.max(np.abs(fine.likelihood @ T - coarse.likelihood)))
    return BlackwellResult(err <= max(tol, 1e-8), T, err)


def profile_more_informative(fine: Sequence[Signal], coarse: Sequence[Signal], tol: float = 1e-9) -> bool:
    """Every student's signal in ``fine`` is more informative than in ``coarse``."""
    return all(is_more_informative(f, c, tol).informative for f, c in zip(fine, coarse, strict=True))


def apply_garbling(signal: Signal, garbling, labels: Sequence[str] | None = None) -> Signal:
    T = np.asarray(garbling, dtype=float)
    if T.ndim != 2 or T.shape[0] != signal.n_realizations:
        raise ValueError(
            f"garbling has shape {T.shape}; expected ({signal.n_realizations}, *)"
        )
    if np.any(T < -ROW_TOL) or np.any(np.abs(T.sum(axis=1) - 1.0) > ROW_TOL):
        raise ValueError("garbling rows must be probability vectors")
    return Signal(signal.likelihood @ T, tuple(labels) if labels else ())
