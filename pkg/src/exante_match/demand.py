"""Ex-ante cutoffs, choice-set lotteries, demand and matching distributions.

Program ``p`` with ex-ante cutoff ``b_p`` admits its top ``floor(b_p)``
students for sure and the next one with probability ``frac(b_p)``. Student
``k`` is therefore admitted to ``p`` with probability
``clamp(b_p - rank_p(k) + 1, 0, 1)``. How those per-program admissions are
coupled for one student is set by ``coupling``:

``"independent"``
    programs draw their deterministic cutoffs independently, so a student who
    is marginal at several programs gets an independent coin at each.
``"continuum"``
    the student is a continuum of points ``e`` in [0, 1] and point ``e`` is
    admitted to ``p`` when ``e <= clamp(b_p - rank_p(k) + 1, 0, 1)``; the
    admissions are comonotone.

The two agree on every per-program admission probability and differ only when
a student is marginal at two or more programs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from exante_match.information import Signal
from exante_match.model import MarketInstance, MatchingError

COUPLINGS = ("independent", "continuum")
DEFAULT_JOINT_CAP = 10**6
CUTOFF_TOL = 1e-12


class JointTooLarge(MatchingError):
    pass


def _check_coupling(coupling: str) -> None:
    if coupling not in COUPLINGS:
        raise ValueError(f"coupling must be one of {COUPLINGS}, got {coupling!r}")


def as_cutoff(inst: MarketInstance, b) -> np.ndarray:
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape != (inst.n,):
        raise ValueError(f"cutoff has {b.size} entries for {inst.n} programs")
    if np.any(b < -CUTOFF_TOL) or np.any(b > inst.t + CUTOFF_TOL):
        raise ValueError(f"cutoff entries must lie in [0, {inst.t}], got {b.tolist()}")
    return np.clip(b, 0.0, inst.t)


def choice_set(inst: MarketInstance, student, cutoff: Sequence[int]) -> frozenset[int]:
    """Programs admitting ``student`` under the deterministic cutoff."""
    k = inst.student_index(student)
    cutoff = np.asarray(cutoff)
    if cutoff.shape != (inst.n,):
        raise ValueError(f"cutoff has {cutoff.size} entries for {inst.n} programs")
    return frozenset(int(p) for p in np.flatnonzero(inst.ranks[:, k] <= cutoff))


@dataclass(frozen=True)
class CutoffDistribution:
    """Independent two-point randomization of each program's deterministic cutoff."""

    marginals: tuple[dict[int, float], ...]

    def support(self) -> Iterator[tuple[tuple[int, ...], float]]:
        items = [sorted(m.items()) for m in self.marginals]
        for combo in itertools.product(*items):
            cutoff = tuple(v for v, _ in combo)
            weight = math.prod(w for _, w in combo)
            yield cutoff, weight

    def prob(self, cutoff: Sequence[int]) -> float:
        return math.prod(m.get(int(c), 0.0) for m, c in zip(self.marginals, cutoff))

    def __len__(self) -> int:
        return math.prod(len(m) for m in self.marginals)


def cutoff_distribution(b, t: float | None = None) -> CutoffDistribution:
    b = np.asarray(b, dtype=float).reshape(-1)
    upper = np.inf if t is None else t
    if np.any(b < -CUTOFF_TOL) or np.any(b > upper + CUTOFF_TOL):
        raise ValueError(f"cutoff entries must lie in [0, {upper}], got {b.tolist()}")
    marginals = []
    for bp in np.clip(b, 0.0, upper):
        lo = math.floor(bp)
        frac = bp - lo
        if frac == 0.0:
            marginals.append({lo: 1.0})
        else:
            marginals.append({lo: 1.0 - frac, lo + 1: frac})
    return CutoffDistribution(tuple(marginals))


def admission_probabilities(inst: MarketInstance, b) -> np.ndarray:
    """``theta[k, p]``: probability that program p admits student k."""
    b = as_cutoff(inst, b)
    return np.clip(b[None, :] - inst.ranks.T + 1.0, 0.0, 1.0)


def choice_set_lottery(theta: np.ndarray, coupling: str = "independent") -> list[tuple[frozenset[int], float]]:
    """Distribution of one student's choice set given her admission probabilities."""
    _check_coupling(coupling)
    theta = np.asarray(theta, dtype=float)
    if coupling == "independent":
        sure = [p for p in range(theta.size) if theta[p] >= 1.0]
        frac = [p for p in range(theta.size) if 0.0 < theta[p] < 1.0]
        out = []
        for bits in itertools.product((0, 1), repeat=len(frac)):
            prob = 1.0
            members = list(sure)
            for p, bit in zip(frac, bits):
                prob *= theta[p] if bit else 1.0 - theta[p]
                if bit:
                    members.append(p)
            out.append((frozenset(members), prob))
        return out

    levels = sorted({float(v) for v in theta if v > 0.0}, reverse=True)
    out = []
    top = levels[0] if levels else 0.0
    if top < 1.0:
        out.append((frozenset(), 1.0 - top))
    for j, level in enumerate(levels):
        below = levels[j + 1] if j + 1 < len(levels) else 0.0
        members = frozenset(int(p) for p in np.flatnonzero(theta >= level))
        out.append((members, level - below))
    return out


def choice_mass(inst: MarketInstance, signal: Signal, rule, k: int, C: frozenset[int]) -> np.ndarray:
    """Probability that student k takes each program when her choice set is C."""
    if not C:
        return np.zeros(inst.n)
    joint = signal.likelihood.T * inst.prior[None, :]  # (I, states)
    return np.einsum("iw,iwp->p", joint, rule.probs(k, C))


def student_outcomes(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                     coupling: str = "independent") -> np.ndarray:
    """Match probabilities, shape ``(t, n + 1)``; the last column is unmatched."""
    theta = admission_probabilities(inst, b)
    out = np.zeros((inst.t, inst.n + 1))
    for k in range(inst.t):
        for C, prob in choice_set_lottery(theta[k], coupling):
            if prob == 0.0:
                continue
            if C:
                out[k, :inst.n] += prob * choice_mass(inst, signals[k], rule, k, C)
            else:
                out[k, inst.n] += prob
    return out


@dataclass(frozen=True, eq=False)
class DemandVector:
    values: np.ndarray
    unmatched: float

    def __getitem__(self, p):
        return self.values[p]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def total(self) -> float:
        return float(self.values.sum() + self.unmatched)


def demand(inst: MarketInstance, signals: Sequence[Signal], rule, b,
           coupling: str = "independent") -> DemandVector:
    """Expected number of students taking each program at ex-ante cutoff ``b``."""
    outcomes = student_outcomes(inst, signals, rule, b, coupling)
    return DemandVector(outcomes[:, :inst.n].sum(axis=0), float(outcomes[:, inst.n].sum()))


@dataclass(frozen=True, eq=False)
class JointOutcome:
    cutoff: tuple[int, ...] | None  # deterministic cutoff (independent coupling)
    choice_sets: tuple[frozenset[int], ...]
    state: int
    realizations: tuple[int, ...]
    matching: tuple[int, ...]  # program per student, -1 when unmatched
    weight: float


@dataclass(frozen=True, eq=False)
class MatchingDistribution:
    marginals: np.ndarray  # (t, n + 1)
    joint: tuple[JointOutcome, ...] | None = None

    def demand(self) -> np.ndarray:
        return self.marginals[:, :-1].sum(axis=0)

    def by_matching(self) -> dict[tuple[int, ...], float]:
        if self.joint is None:
            raise ValueError("joint support was not computed")
        agg: dict[tuple[int, ...], float] = {}
        for o in self.joint:
            agg[o.matching] = agg.get(o.matching, 0.0) + o.weight
        return agg


def _joint_size(inst, signals, rule, b, coupling) -> int:
    theta = admission_probabilities(inst, b)
    if coupling == "independent":
        sets = len(cutoff_distribution(as_cutoff(inst, b), inst.t))
    else:
        sets = math.prod(len(choice_set_lottery(theta[k], coupling)) for k in range(inst.t))
    choices = 1 if getattr(rule, "is_degenerate", lambda: True)() else inst.n ** inst.t
    return sets * inst.n_states * math.prod(s.n_realizations for s in signals) * choices


def _enumerate_joint(inst, signals, rule, b, coupling) -> list[JointOutcome]:
    b = as_cutoff(inst, b)
    if coupling == "independent":
        scenarios = []
        for cutoff, w in cutoff_distribution(b, inst.t).support():
            sets = tuple(choice_set(inst, k, cutoff) for k in range(inst.t))
            scenarios.append((cutoff, sets, w))
    else:
        theta = admission_probabilities(inst, b)
        lotteries = [choice_set_lottery(theta[k], coupling) for k in range(inst.t)]
        scenarios = []
        for combo in itertools.product(*lotteries):
            sets = tuple(C for C, _ in combo)
            scenarios.append((None, sets, math.prod(w for _, w in combo)))

    out = []
    for cutoff, sets, w_cut in scenarios:
        if w_cut == 0.0:
            continue
        for state in range(inst.n_states):
            w_state = w_cut * inst.prior[state]
            if w_state == 0.0:
                continue
            for reals in itertools.product(*(range(s.n_realizations) for s in signals)):
                w_sig = w_state
                for k, i in enumerate(reals):
                    w_sig *= signals[k].likelihood[state, i]
                if w_sig == 0.0:
                    continue
                per_student = []
                for k, (C, i) in enumerate(zip(sets, reals)):
                    if not C:
                        per_student.append([(-1, 1.0)])
                        continue
                    dist = rule.probs(k, C)[i, state]
                    per_student.append([(int(p), float(dist[p])) for p in np.flatnonzero(dist > 0)])
                for picks in itertools.product(*per_student):
                    weight = w_sig * math.prod(q for _, q in picks)
                    out.append(JointOutcome(cutoff, sets, state, tuple(reals),
                                            tuple(p for p, _ in picks), weight))
    return out


def matching_distribution(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                          coupling: str = "independent", joint_cap: int = DEFAULT_JOINT_CAP,
                          joint: bool | None = None) -> MatchingDistribution:
    """Per-student match probabilities, plus the joint support when small enough.

    ``joint=None`` emits the joint support only if it fits under ``joint_cap``;
    ``joint=True`` raises :class:`JointTooLarge` instead of skipping it.
    Under continuum coupling students' points are drawn independently of each
    other in the joint support.
    """
    _check_coupling(coupling)
    marginals = student_outcomes(inst, signals, rule, b, coupling)
    support = None
    if joint is not False:
        size = _joint_size(inst, signals, rule, b, coupling)
        if size <= joint_cap:
            support = tuple(_enumerate_joint(inst, signals, rule, b, coupling))
        elif joint:
            raise JointTooLarge(f"joint support bound {size} exceeds cap {joint_cap}")
    return MatchingDistribution(marginals, support)
