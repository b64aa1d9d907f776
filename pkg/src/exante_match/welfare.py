"""Student and program welfare, Pareto comparison of signal profiles, serial dictatorship."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from exante_match.clearing import (
    ClearingConfig,
    greatest_market_clearing,
    verify_market_clearing,
)
from exante_match.decisions import NaiveRule
from exante_match.demand import admission_probabilities, as_cutoff, choice_set_lottery, student_outcomes
from exante_match.information import Signal, profile_more_informative
from exante_match.linprog import LinearProgram, maximize
from exante_match.model import MarketInstance, MatchingError

WELFARE_TOL = 1e-9


class MissingProgramUtilities(MatchingError, ValueError):
    pass


class IncomparableCutoffs(MatchingError, ValueError):
    pass


class NotCommonPriority(MatchingError, ValueError):
    pass


def _per_student(inst, signals, rule, b, coupling, weights_fn):
    """Sum ``P(C) * sum_{i,w} psi pi sigma(C)(p|i,w) * weights_fn(k)[i?, w, p]`` per student."""
    theta = admission_probabilities(inst, b)
    out = []
    for k in range(inst.t):
        joint = signals[k].likelihood.T * inst.prior[None, :]  # (I, states)
        weights, unmatched = weights_fn(k)
        total = np.zeros_like(unmatched, dtype=float)
        for C, prob in choice_set_lottery(theta[k], coupling):
            if prob == 0.0:
                continue
            if not C:
                total = total + prob * unmatched
                continue
            total = total + prob * np.einsum("iw,iwp,wp...->...", joint, rule.probs(k, C), weights)
        out.append(total)
    return np.array(out)


def student_utilities(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                      coupling: str = "independent") -> np.ndarray:
    u = inst.utilities.values  # (t, n, states)

    def weights(k):
        return u[k].T, np.asarray(inst.unmatched_utility, dtype=float)

    return _per_student(inst, signals, rule, b, coupling, weights)


def expected_utility(inst: MarketInstance, signals: Sequence[Signal], rule, b, student,
                     coupling: str = "independent") -> float:
    k = inst.student_index(student)
    return float(student_utilities(inst, signals, rule, b, coupling)[k])


def rank_distributions(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                       coupling: str = "independent") -> np.ndarray:
    """``(t, n + 1)``: probability of getting one's i-th choice in the realized state; last column unmatched."""
    pos = inst.utilities.position()  # (t, states, n)
    n = inst.n

    def weights(k):
        w = np.zeros((inst.n_states, n, n + 1))
        for s in range(inst.n_states):
            w[s, np.arange(n), pos[k, s]] = 1.0
        unmatched = np.zeros(n + 1)
        unmatched[n] = 1.0
        return w, unmatched

    return _per_student(inst, signals, rule, b, coupling, weights)


def rank_distribution(inst: MarketInstance, signals: Sequence[Signal], rule, b, student,
                      coupling: str = "independent") -> np.ndarray:
    k = inst.student_index(student)
    return rank_distributions(inst, signals, rule, b, coupling)[k]


def expected_program_utility(inst: MarketInstance, signals: Sequence[Signal], rule, b, program,
                             coupling: str = "independent") -> float:
    if inst.program_utilities is None:
        raise MissingProgramUtilities("instance has no program utilities")
    p = inst.program_index(program)
    outcomes = student_outcomes(inst, signals, rule, b, coupling)
    return float(outcomes[:, p] @ inst.program_utilities[p])


@dataclass(frozen=True, eq=False)
class WelfareReport:
    cutoff: np.ndarray
    utilities: np.ndarray
    rank_distributions: np.ndarray
    program_utilities: np.ndarray | None = None


def welfare_report(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                   coupling: str = "independent") -> WelfareReport:
    b = as_cutoff(inst, b)
    program_u = None
    if inst.program_utilities is not None:
        outcomes = student_outcomes(inst, signals, rule, b, coupling)
        program_u = np.einsum("kp,pk->p", outcomes[:, :inst.n], inst.program_utilities)
    return WelfareReport(
        b,
        student_utilities(inst, signals, rule, b, coupling),
        rank_distributions(inst, signals, rule, b, coupling),
        program_u,
    )


@dataclass(frozen=True, eq=False)
class MonotonicityReport:
    high: np.ndarray
    low: np.ndarray
    student_gaps: np.ndarray  # U_k(high) - U_k(low)
    program_gaps: np.ndarray | None  # U_p(low) - U_p(high), only for clearing pairs
    tol: float

    @property
    def ok(self) -> bool:
        students = bool(np.all(self.student_gaps >= -self.tol))
        programs = self.program_gaps is None or bool(np.all(self.program_gaps >= -self.tol))
        return students and programs

    def __bool__(self) -> bool:
        return self.ok


def welfare_monotonicity_check(inst: MarketInstance, signals: Sequence[Signal], rule, b, b_other,
                               tol: float = WELFARE_TOL, coupling: str = "independent",
                               clearing_tol: float = 1e-6) -> MonotonicityReport:
    """Students weakly prefer the higher of two comparable cutoffs.

    When both cutoffs clear the market and the instance carries program
    utilities, also checks that every program weakly prefers the lower one.
    """
    b = as_cutoff(inst, b)
    b_other = as_cutoff(inst, b_other)
    if np.all(b >= b_other):
        high, low = b, b_other
    elif np.all(b_other >= b):
        high, low = b_other, b
    else:
        raise IncomparableCutoffs(f"{b.tolist()} and {b_other.tolist()} are not ordered")
    gaps = (student_utilities(inst, signals, rule, high, coupling)
            - student_utilities(inst, signals, rule, low, coupling))
    program_gaps = None
    if inst.program_utilities is not None and all(
        verify_market_clearing(inst, signals, rule, c, clearing_tol, coupling).ok for c in (high, low)
    ):
        u_high = welfare_report(inst, signals, rule, high, coupling).program_utilities
        u_low = welfare_report(inst, signals, rule, low, coupling).program_utilities
        program_gaps = u_low - u_high
    return MonotonicityReport(high, low, gaps, program_gaps, tol)


@dataclass(frozen=True, eq=False)
class ParetoVerdict:
    verdict: str  # "left-dominates", "right-dominates", "equivalent", "incomparable"
    deltas: np.ndarray  # left minus right
    left_utilities: np.ndarray
    right_utilities: np.ndarray
    left_cutoff: np.ndarray
    right_cutoff: np.ndarray


def classify(deltas: np.ndarray, tol: float = WELFARE_TOL) -> str:
    if np.all(np.abs(deltas) <= tol):
        return "equivalent"
    if np.all(deltas >= -tol):
        return "left-dominates"
    if np.all(deltas <= tol):
        return "right-dominates"
    return "incomparable"


def pareto_compare(inst: MarketInstance, left: Sequence[Signal], right: Sequence[Signal],
                   tie_break: str = "error", cfg: ClearingConfig = ClearingConfig(),
                   tol: float = WELFARE_TOL) -> ParetoVerdict:
    """Compare two signal profiles by student utilities at their greatest clearing cutoffs."""
    results = []
    for signals in (left, right):
        rule = NaiveRule(inst, signals, tie_break=tie_break)
        res = greatest_market_clearing(inst, signals, rule, cfg)
        results.append((res.cutoff, student_utilities(inst, signals, rule, res.cutoff, cfg.coupling)))
    (b_l, u_l), (b_r, u_r) = results
    deltas = u_l - u_r
    return ParetoVerdict(classify(deltas, tol), deltas, u_l, u_r, b_l, b_r)


@dataclass(frozen=True, eq=False)
class CorollaryReport:
    more_informative: bool
    cutoffs_ordered: bool
    verdict: ParetoVerdict

    @property
    def premises(self) -> bool:
        return self.more_informative and self.cutoffs_ordered

    @property
    def holds(self) -> bool:
        """False only if both premises hold and the first profile is still dominated."""
        return not self.premises or self.verdict.verdict != "right-dominates"


def corollary1_check(inst: MarketInstance, signals: Sequence[Signal], other: Sequence[Signal],
                     tie_break: str = "error", cfg: ClearingConfig = ClearingConfig(),
                     tol: float = WELFARE_TOL) -> CorollaryReport:
    """A more informative profile with a higher greatest cutoff is never Pareto dominated."""
    verdict = pareto_compare(inst, signals, other, tie_break, cfg, tol)
    informative = profile_more_informative(signals, other)
    ordered = bool(np.all(verdict.left_cutoff >= verdict.right_cutoff - cfg.clearing_tol))
    return CorollaryReport(informative, ordered, verdict)


@dataclass(frozen=True, eq=False)
class SerialDictatorship:
    order: tuple[int, ...]
    allocation: np.ndarray  # (t, n, states): mass of program p in state w
    outcomes: np.ndarray  # (t, n + 1) aggregated over states
    utilities: np.ndarray


def serial_dictatorship(inst: MarketInstance, tol: float = 1e-9) -> SerialDictatorship:
    """Sequential welfare maximization in the common priority order under full information.

    Each student picks a state-contingent allocation ``A[p, w]`` maximizing
    ``sum_w psi(w) sum_p A[p, w] u(p, w)`` subject to ``sum_p A[p, w] <= 1`` in
    every state and ``sum_w psi(w) A[p, w]`` not exceeding what earlier
    students left of ``M_p``.
    """
    if not inst.has_common_priority():
        raise NotCommonPriority("programs do not share one priority order")
    n, S = inst.n, inst.n_states
    psi = inst.prior
    remaining = inst.capacities.astype(float).copy()
    allocation = np.zeros((inst.t, n, S))
    utilities = np.zeros(inst.t)
    u0 = inst.unmatched_utility
    for k in inst.priorities[0]:
        u = inst.utilities.values[k]
        objective = (psi[None, :] * (u - u0)).reshape(-1)  # variable (p, w) at p * S + w
        per_state = np.zeros((S, n * S))
        for w in range(S):
            per_state[w, w::S] = 1.0
        capacity_rows = np.zeros((n, n * S))
        for p in range(n):
            capacity_rows[p, p * S:(p + 1) * S] = psi
        lp = LinearProgram(
            n * S,
            objective=objective,
            A_ub=np.vstack([per_state, capacity_rows]),
            b_ub=np.concatenate([np.ones(S), np.maximum(remaining, 0.0)]),
            upper=np.ones(n * S),
        )
        res = maximize(lp, tol)
        if res.status != "optimal":
            raise MatchingError(f"allocation problem for student {k} is {res.status}")
        A = np.clip(res.x.reshape(n, S), 0.0, 1.0)
        allocation[k] = A
        remaining -= A @ psi
        utilities[k] = float(np.sum(psi[None, :] * A * u) + u0 * (1.0 - np.sum(A @ psi)))
    outcomes = np.zeros((inst.t, n + 1))
    outcomes[:, :n] = allocation @ psi
    outcomes[:, n] = 1.0 - outcomes[:, :n].sum(axis=1)
    return SerialDictatorship(tuple(inst.priorities[0]), allocation, outcomes, utilities)
