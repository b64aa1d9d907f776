"""Student decision rules and the obedience / gross-substitutes verifiers.

A decision profile answers one question: for student ``k`` facing choice set
``C``, what is the probability of taking each program, given her signal
realization and the state? Both rule types below expose that through
``probs(k, C)``, an array of shape ``(realizations, states, programs)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from exante_match.information import Signal, posterior_matrix
from exante_match.model import MarketInstance, MatchingError, TieError

TIE_TOL = 1e-9


class EmptyChoiceSet(MatchingError, ValueError):
    """Raised when a rule is asked to choose from an empty set (the student is unmatched)."""


def as_choice_set(programs: Iterable[int]) -> frozenset[int]:
    return frozenset(int(p) for p in programs)


def mask_to_set(mask: int) -> frozenset[int]:
    return frozenset(p for p in range(mask.bit_length()) if mask >> p & 1)


def set_to_mask(choice_set: Iterable[int]) -> int:
    mask = 0
    for p in choice_set:
        mask |= 1 << p
    return mask


def nonempty_subsets(n: int) -> Iterable[frozenset[int]]:
    for mask in range(1, 1 << n):
        yield mask_to_set(mask)


class NaiveRule:
    """Each student takes the program with the highest posterior expected utility.

    Ties are checked for every realization with positive probability and every
    pair of programs when the rule is built, because any pair can make up an
    entire choice set at suitable cutoffs. ``tie_break="index"`` instead
    resolves ties toward the lowest program index.
    """

    def __init__(self, inst: MarketInstance, signals: Sequence[Signal], tie_break: str = "error",
                 tol: float = TIE_TOL):
        if tie_break not in ("error", "index"):
            raise ValueError("tie_break must be 'error' or 'index'")
        if len(signals) != inst.t:
            raise ValueError(f"{len(signals)} signals for {inst.t} students")
        self.inst = inst
        self.signals = tuple(signals)
        self.tie_break = tie_break
        self.tol = tol
        self.expected = []
        self.marginals = []
        for k, sig in enumerate(self.signals):
            post, marg = posterior_matrix(inst.prior, sig)
            eu = post @ inst.utilities.values[k].T
            # zero-probability realizations never carry weight; decide them under the prior
            eu[marg <= 0] = inst.prior @ inst.utilities.values[k].T
            self.expected.append(eu)
            self.marginals.append(marg)
        self._cache: dict[tuple[int, frozenset[int]], np.ndarray] = {}
        if tie_break == "error":
            self._check_ties()

    def _check_ties(self) -> None:
        for k, eu in enumerate(self.expected):
            for i in np.flatnonzero(self.marginals[k] > 0):
                row = np.sort(eu[i])
                gaps = np.diff(row)
                if gaps.size and gaps.min() <= self.tol:
                    j = int(np.argmin(gaps))
                    lo, hi = row[j], row[j + 1]
                    p = int(np.flatnonzero(np.isclose(eu[i], lo, atol=self.tol, rtol=0))[0])
                    q = int(np.flatnonzero(np.isclose(eu[i], hi, atol=self.tol, rtol=0))[-1])
                    raise TieError(k, int(i), (p, q), float(gaps.min()))

    def choose(self, k: int, choice_set: Iterable[int], i: int) -> int:
        members = sorted(choice_set)
        if not members:
            raise EmptyChoiceSet(f"student {k} has an empty choice set")
        vals = self.expected[k][i, members]
        best = vals.max()
        winners = [p for p, v in zip(members, vals) if v >= best - self.tol]
        if len(winners) > 1 and self.tie_break == "error" and self.marginals[k][i] > 0:
            raise TieError(k, i, (winners[0], winners[1]), float(abs(vals.max() - sorted(vals)[-2])))
        if len(winners) > 1:
            return winners[0]
        return members[int(np.argmax(vals))]

    def probs(self, k: int, choice_set: frozenset[int]) -> np.ndarray:
        key = (k, choice_set)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        I = self.signals[k].n_realizations
        out = np.zeros((I, self.inst.n_states, self.inst.n))
        if choice_set:
            for i in range(I):
                out[i, :, self.choose(k, choice_set, i)] = 1.0
        self._cache[key] = out
        return out


def naive_decide(rule: NaiveRule, student, choice_set: Iterable, realization) -> int:
    """Program index chosen by ``student`` from ``choice_set`` after observing ``realization``."""
    inst = rule.inst
    k = inst.student_index(student)
    members = as_choice_set(inst.program_index(p) for p in choice_set)
    i = rule.signals[k].realization_index(realization)
    return rule.choose(k, members, i)


class GeneralDecisionProfile:
    """Stochastic, possibly state-dependent recommendations ``sigma_k(C)(p | i, w)``.

    ``table`` maps ``(k, C)`` to an array of shape ``(realizations, states,
    programs)``; ``fallback(k, C)`` supplies any set missing from the table.
    """

    def __init__(self, n_programs: int, n_states: int, realizations: Sequence[int],
                 table: dict[tuple[int, frozenset[int]], np.ndarray] | None = None,
                 fallback: Callable[[int, frozenset[int]], np.ndarray] | None = None,
                 tol: float = 1e-9):
        self.n = n_programs
        self.n_states = n_states
        self.realizations = tuple(realizations)
        self.fallback = fallback
        self.tol = tol
        self._table: dict[tuple[int, frozenset[int]], np.ndarray] = {}
        for (k, C), arr in (table or {}).items():
            self._table[(k, as_choice_set(C))] = self._checked(k, as_choice_set(C), arr)

    def _checked(self, k: int, C: frozenset[int], arr) -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        shape = (self.realizations[k], self.n_states, self.n)
        if arr.shape != shape:
            raise ValueError(f"profile entry for student {k}, set {sorted(C)} has shape {arr.shape}, expected {shape}")
        if not C:
            if np.any(arr != 0):
                raise ValueError("the empty choice set carries no choice probabilities")
            return arr
        outside = [p for p in range(self.n) if p not in C]
        if np.any(arr < -self.tol):
            raise ValueError(f"negative probability for student {k}, set {sorted(C)}")
        if outside and np.any(np.abs(arr[..., outside]) > self.tol):
            raise ValueError(f"mass outside the choice set for student {k}, set {sorted(C)}")
        if np.any(np.abs(arr.sum(axis=-1) - 1.0) > self.tol):
            raise ValueError(f"probabilities do not sum to one for student {k}, set {sorted(C)}")
        return arr

    def probs(self, k: int, choice_set: frozenset[int]) -> np.ndarray:
        key = (k, choice_set)
        arr = self._table.get(key)
        if arr is None:
            if not choice_set:
                arr = np.zeros((self.realizations[k], self.n_states, self.n))
            elif self.fallback is None:
                raise KeyError(f"no decision rule for student {k}, choice set {sorted(choice_set)}")
            else:
                arr = self._checked(k, choice_set, self.fallback(k, choice_set))
            self._table[key] = arr
        return arr

    def is_degenerate(self) -> bool:
        return all(np.all((a == 0) | (a == 1)) for a in self._table.values())


def lift_naive(rule: NaiveRule) -> GeneralDecisionProfile:
    """Tabulate a naive rule on every nonempty choice set."""
    inst = rule.inst
    table = {}
    for k in range(inst.t):
        for C in nonempty_subsets(inst.n):
            table[(k, C)] = rule.probs(k, C)
    return GeneralDecisionProfile(inst.n, inst.n_states, [s.n_realizations for s in rule.signals], table)


@dataclass(frozen=True)
class CheckReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def check_obedience(inst: MarketInstance, signals: Sequence[Signal], profile, tol: float = 1e-9,
                    literal: bool = False) -> CheckReport:
    """Check that following each recommendation is ex-interim optimal.

    The default compares, for a recommended ``p`` and any ``q`` in the choice
    set, ``sum_w psi(w) pi(i|w) sigma(p|i,w) [u(p,w) - u(q,w)] >= -tol``.
    ``literal=True`` instead compares ``sigma(p) u(p)`` against ``sigma(q) u(q)``.
    Violations are ``(student, choice set, realization, p, q, slack)``.
    """
    found = []
    for k in range(inst.t):
        u = inst.utilities.values[k]  # (n, states)
        _, marg = posterior_matrix(inst.prior, signals[k])
        joint = signals[k].likelihood.T * inst.prior[None, :]  # (I, states)
        for C in nonempty_subsets(inst.n):
            members = sorted(C)
            sig = profile.probs(k, C)
            for i in np.flatnonzero(marg > 0):
                weighted = joint[i][:, None] * sig[i]  # (states, n)
                M = weighted.T @ u.T  # M[p, q] = sum_w w sigma(p) u(q)
                own = np.diag(M)
                for p in members:
                    for q in members:
                        if p == q:
                            continue
                        slack = own[p] - own[q] if literal else own[p] - M[p, q]
                        if slack < -tol:
                            found.append((k, tuple(members), int(i), p, q, float(slack)))
    return CheckReport(tuple(found))


def check_gross_substitutes(inst: MarketInstance, signals: Sequence[Signal], profile,
                            tol: float = 1e-9) -> CheckReport:
    """Check ``sigma(C)(p) >= sigma(C')(p)`` for every nested pair ``C <= C'`` and ``p`` in C.

    Violations are ``(student, C, C', p, worst excess)``.
    """
    found = []
    n = inst.n
    for k in range(inst.t):
        _, marg = posterior_matrix(inst.prior, signals[k])
        support = np.flatnonzero(marg > 0)
        for big in range(1, 1 << n):
            big_probs = profile.probs(k, mask_to_set(big))[support]
            sub = (big - 1) & big
            while sub:
                C = mask_to_set(sub)
                small_probs = profile.probs(k, C)[support]
                members = sorted(C)
                excess = big_probs[..., members] - small_probs[..., members]
                worst = float(excess.max())
                if worst > tol:
                    p = members[int(np.unravel_index(np.argmax(excess), excess.shape)[-1])]
                    found.append((k, tuple(members), tuple(sorted(mask_to_set(big))), p, worst))
                sub = (sub - 1) & big
    return CheckReport(tuple(found))


def uniform_profile_rule(inst: MarketInstance, signals: Sequence[Signal]) -> GeneralDecisionProfile:
    """Choose uniformly at random within the choice set."""

    def uniform(k: int, C: frozenset[int]) -> np.ndarray:
        arr = np.zeros((signals[k].n_realizations, inst.n_states, inst.n))
        arr[..., sorted(C)] = 1.0 / len(C)
        return arr

    return GeneralDecisionProfile(inst.n, inst.n_states, [s.n_realizations for s in signals], fallback=uniform)

