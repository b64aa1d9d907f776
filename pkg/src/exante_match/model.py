"""Market primitives: students, programs, priorities, states and utilities.

Everything here is index based internally. Each entity keeps its string label
for reporting, and every public lookup accepts either a
label or a zero-based index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PRIOR_TOL = 1e-9


class MatchingError(Exception):
    """Base class for errors raised by this package."""


class UnknownIdentifier(MatchingError, KeyError):
    pass


class TieError(MatchingError):
    """Two programs give the same expected payoff to a student."""

    def __init__(self, student: int, realization: int, programs: tuple[int, int], gap: float):
        self.student = student
        self.realization = realization
        self.programs = programs
        self.gap = gap
        super().__init__(
            f"student {student}, realization {realization}: programs {programs} "
            f"tie in expected utility (gap {gap:.3g})"
        )


@dataclass(frozen=True, eq=False)
class UtilityModel:
    """Cardinal utilities ``values[k, p, w]`` for student k, program p, state w.

    ``rankings[k][w]`` lists program indices best first. In rank-based mode the
    utility of the i-th ranked program is ``rank_values[i]``.
    """

    values: np.ndarray
    rankings: tuple[tuple[tuple[int, ...], ...], ...]
    rank_values: np.ndarray | None = None

    @classmethod
    def from_rankings(cls, rankings: Sequence[Sequence[Sequence[int]]], rank_values) -> "UtilityModel":
        ubar = np.asarray(rank_values, dtype=float)
        t = len(rankings)
        n_states = len(rankings[0]) if t else 0
        n = len(ubar)
        values = np.zeros((t, n, n_states))
        for k, per_state in enumerate(rankings):
            for w, order in enumerate(per_state):
                for pos, p in enumerate(order):
                    values[k, p, w] = ubar[pos]
        frozen = tuple(tuple(tuple(int(p) for p in order) for order in per_state) for per_state in rankings)
        return cls(values=values, rankings=frozen, rank_values=ubar)

    @classmethod
    def from_matrix(cls, values) -> "UtilityModel":
        u = np.asarray(values, dtype=float)
        if u.ndim != 3:
            raise ValueError("utility matrix must have shape (students, programs, states)")
        rankings = tuple(
            tuple(tuple(int(p) for p in np.argsort(-u[k, :, w], kind="stable")) for w in range(u.shape[2]))
            for k in range(u.shape[0])
        )
        return cls(values=u, rankings=rankings, rank_values=None)

    @property
    def rank_based(self) -> bool:
        return self.rank_values is not None

    def position(self) -> np.ndarray:
        """``pos[k, w, p]``: zero-based position of p in student k's ranking in state w."""
        t, n, n_states = self.values.shape
        pos = np.zeros((t, n_states, n), dtype=int)
        for k in range(t):
            for w in range(n_states):
                pos[k, w, list(self.rankings[k][w])] = np.arange(n)
        return pos

    def with_rank_values(self, rank_values) -> "UtilityModel":
        return UtilityModel.from_rankings(self.rankings, rank_values)


@dataclass(frozen=True, eq=False)
class MarketInstance:
    students: tuple[str, ...]
    programs: tuple[str, ...]
    capacities: np.ndarray
    priorities: tuple[tuple[int, ...], ...]
    states: tuple[str, ...]
    prior: np.ndarray
    utilities: UtilityModel
    program_utilities: np.ndarray | None = None
    unmatched_utility: float = 0.0
    completions: tuple[str, ...] = ()
    _ranks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "capacities", np.asarray(self.capacities, dtype=float))
        object.__setattr__(self, "prior", np.asarray(self.prior, dtype=float))
        if self.program_utilities is not None:
            object.__setattr__(self, "program_utilities", np.asarray(self.program_utilities, dtype=float))
        ranks = np.zeros((len(self.programs), len(self.students)), dtype=int)
        for p, order in enumerate(self.priorities):
            for pos, s in enumerate(order):
                if 0 <= s < len(self.students):
                    ranks[p, s] = pos + 1
        object.__setattr__(self, "_ranks", ranks)

    @property
    def t(self) -> int:
        return len(self.students)

    @property
    def n(self) -> int:
        return len(self.programs)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def ranks(self) -> np.ndarray:
        """``ranks[p, k]``: 1-based priority rank of student k at program p."""
        return self._ranks

    def student_index(self, student) -> int:
        return _lookup(self.students, student, "student")

    def program_index(self, program) -> int:
        return _lookup(self.programs, program, "program")

    def state_index(self, state) -> int:
        return _lookup(self.states, state, "state")

    def has_common_priority(self) -> bool:
        return all(order == self.priorities[0] for order in self.priorities)

    def replace(self, **changes) -> "MarketInstance":
        fields = dict(
            students=self.students,
            programs=self.programs,
            capacities=self.capacities,
            priorities=self.priorities,
            states=self.states,
            prior=self.prior,
            utilities=self.utilities,
            program_utilities=self.program_utilities,
            unmatched_utility=self.unmatched_utility,
            completions=self.completions,
        )
        fields.update(changes)
        return MarketInstance(**fields)


def _lookup(labels: tuple[str, ...], key, kind: str) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        if 0 <= key < len(labels):
            return int(key)
        raise UnknownIdentifier(f"{kind} index {key} out of range")
    try:
        return labels.index(key)
    except ValueError:
        raise UnknownIdentifier(f"unknown {kind} {key!r}") from None


def make_instance(
    students: Sequence[str],
    programs: Sequence[str],
    capacities,
    priorities: dict[str, Sequence[str]] | Sequence[Sequence[str]],
    states: Sequence[str],
    prior,
    rankings: dict[str, Sequence[Sequence[str]]] | None = None,
    rank_values=None,
    utility_matrix=None,
    program_utilities=None,
    unmatched_utility: float = 0.0,
) -> MarketInstance:
    """Build an instance from labels.

    ``priorities`` maps each program to its students, highest priority first.
    ``rankings`` maps each student to one ranking per state, best first; a
    ranking may be partial, in which case the missing programs are appended in
    program order and the completion is recorded on the instance.
    """
    students = tuple(students)
    programs = tuple(programs)
    states = tuple(states)
    if isinstance(priorities, dict):
        priorities = [priorities[p] for p in programs]
    prio = tuple(tuple(_lookup(students, s, "student") for s in order) for order in priorities)

    completions: list[str] = []
    if utility_matrix is not None:
        utilities = UtilityModel.from_matrix(utility_matrix)
    else:
        if rankings is None:
            raise ValueError("either rankings or utility_matrix is required")
        if rank_values is None:
            rank_values = np.arange(len(programs), 0, -1, dtype=float)
        idx_rankings = []
        for s in students:
            per_state = []
            for w, order in enumerate(rankings[s]):
                ids = [_lookup(programs, p, "program") for p in order]
                if len(ids) < len(programs):
                    missing = [p for p in range(len(programs)) if p not in ids]
                    completions.append(
                        f"{s} in {states[w]}: appended {', '.join(programs[p] for p in missing)}"
                    )
                    ids.extend(missing)
                per_state.append(ids)
            idx_rankings.append(per_state)
        utilities = UtilityModel.from_rankings(idx_rankings, rank_values)

    pu = None
    if program_utilities is not None:
        if isinstance(program_utilities, dict):
            pu = np.array([[program_utilities[p][s] for s in students] for p in programs], dtype=float)
        else:
            pu = np.asarray(program_utilities, dtype=float)

    return MarketInstance(
        students=students,
        programs=programs,
        capacities=np.asarray(capacities, dtype=float),
        priorities=prio,
        states=states,
        prior=np.asarray(prior, dtype=float),
        utilities=utilities,
        program_utilities=pu,
        unmatched_utility=unmatched_utility,
        completions=tuple(completions),
    )


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok


def validate_instance(inst: MarketInstance) -> ValidationReport:
    problems: list[str] = []
    t, n, m = inst.t, inst.n, inst.n_states

    if inst.prior.shape != (m,):
        problems.append(f"prior has shape {inst.prior.shape}, expected ({m},)")
    else:
        if np.any(inst.prior < 0):
            problems.append("prior has negative entries")
        if abs(inst.prior.sum() - 1.0) > PRIOR_TOL:
            problems.append(f"prior not normalized (sums to {inst.prior.sum():.12g})")

    if inst.capacities.shape != (n,):
        problems.append(f"capacities have shape {inst.capacities.shape}, expected ({n},)")
    elif np.any(inst.capacities <= 0):
        bad = [inst.programs[p] for p in np.flatnonzero(inst.capacities <= 0)]
        problems.append(f"capacities not strictly positive at {bad}")

    if len(inst.priorities) != n:
        problems.append(f"{len(inst.priorities)} priority orders for {n} programs")
    for p, order in enumerate(inst.priorities):
        if sorted(order) != list(range(t)):
            problems.append(f"priority of {inst.programs[p] if p < n else p} is not a permutation of students")

    u = inst.utilities
    if u.values.shape != (t, n, m):
        problems.append(f"utilities have shape {u.values.shape}, expected {(t, n, m)}")
    else:
        if u.rank_based:
            ubar = u.rank_values
            if len(ubar) != n:
                problems.append(f"rank values have length {len(ubar)}, expected {n}")
            elif np.any(np.diff(ubar) >= 0):
                problems.append("rank values are not strictly decreasing")
            for k in range(t):
                for w in range(m):
                    if sorted(u.rankings[k][w]) != list(range(n)):
                        problems.append(f"ranking of {inst.students[k]} in {inst.states[w]} is not a permutation")
        for k in range(t):
            for w in range(m):
                col = u.values[k, :, w]
                if len(np.unique(col)) != n:
                    problems.append(f"{inst.students[k]} has tied utilities in {inst.states[w]}")
                order = u.rankings[k][w]
                if np.any(np.diff(col[list(order)]) >= 0) and len(order) == n:
                    problems.append(f"utilities of {inst.students[k]} in {inst.states[w]} disagree with ranking")

    if inst.program_utilities is not None:
        pu = inst.program_utilities
        if pu.shape != (n, t):
            problems.append(f"program utilities have shape {pu.shape}, expected {(n, t)}")
        else:
            for p, order in enumerate(inst.priorities):
                if np.any(np.diff(pu[p, list(order)]) >= 0):
                    problems.append(f"program utilities of {inst.programs[p]} not decreasing in priority")

    return ValidationReport(tuple(problems))


def find_ties(inst: MarketInstance, signals, tol: float = 1e-9) -> list[tuple[int, int, int, int, float]]:
    """Pairs of programs with equal expected utility under some induced posterior.

    Returns ``(student, realization, p, q, gap)`` tuples. Any pair can become a
    whole choice set for suitable cutoffs, so every pair is checked.
    """
    from exante_match.information import posterior_matrix

    ties = []
    for k in range(inst.t):
        post, marg = posterior_matrix(inst.prior, signals[k])
        eu = post @ inst.utilities.values[k].T
        for i in np.flatnonzero(marg > 0):
            row = eu[i]
            for p in range(inst.n):
                for q in range(p + 1, inst.n):
                    gap = abs(row[p] - row[q])
                    if gap <= tol:
                        ties.append((k, int(i), p, q, float(gap)))
    return ties


def rank(inst: MarketInstance, program, student) -> int:
    """1-based priority rank: students strictly ahead of ``student`` at ``program``, plus one."""
    return int(inst.ranks[inst.program_index(program), inst.student_index(student)])


def rank_continuum(inst: MarketInstance, program, student, e: float) -> float:
    """Rank of the student point ``(student, e)`` when students are divisible."""
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"e must lie in [0, 1], got {e}")
    p = inst.program_index(program)
    k = inst.student_index(student)
    order = inst.priorities[p]
    ahead = order.index(k)
    return ahead + e
