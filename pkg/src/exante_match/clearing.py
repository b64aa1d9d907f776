"""Market-clearing cutoffs by monotone iteration of the best-response operator.

For program ``p`` and fixed cutoffs of the other programs, demand
``D_p(., b_-p)`` is a nondecreasing piecewise linear function of ``b_p``.
The operator sets ``b_p`` to the largest value at which ``D_p`` equals the
capacity (or to ``t`` if ``D_p(t) <= M_p``). Iterating it from the top of
``[0, t]^n`` gives a nonincreasing sequence converging to the greatest
market-clearing cutoff; from the bottom, a nondecreasing one converging to
the least fixed point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from exante_match.demand import (
    _check_coupling,
    admission_probabilities,
    as_cutoff,
    demand,
    student_outcomes,
)
from exante_match.information import Signal
from exante_match.model import MarketInstance, MatchingError

MONOTONE_TOL = 1e-9


class NonConvergence(MatchingError):
    def __init__(self, result: "ClearingResult"):
        self.result = result
        super().__init__(
            f"no fixed point within {result.sweeps} sweeps "
            f"(last step {result.last_step:.3g})"
        )


class NotMarketClearing(MatchingError, ValueError):
    pass


class InstanceTooLarge(MatchingError, ValueError):
    pass


@dataclass(frozen=True)
class ClearingConfig:
    clearing_tol: float = 1e-6
    fixed_point_tol: float = 1e-10
    max_sweeps: int = 10_000
    scheme: str = "simultaneous"
    coupling: str = "independent"

    def __post_init__(self):
        if self.clearing_tol <= 0 or self.fixed_point_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.scheme not in ("simultaneous", "sequential"):
            raise ValueError("scheme must be 'simultaneous' or 'sequential'")
        _check_coupling(self.coupling)


@dataclass(frozen=True, eq=False)
class ClearingResult:
    cutoff: np.ndarray
    demand: np.ndarray
    converged: bool
    sweeps: int
    residuals: np.ndarray  # demand minus capacity
    last_step: float = 0.0
    trajectory: tuple[np.ndarray, ...] = field(default=(), repr=False)


def _breakpoints(inst: MarketInstance, p: int, b: np.ndarray, coupling: str) -> np.ndarray:
    points = set(float(x) for x in range(inst.t + 1))
    if coupling == "continuum":
        theta = admission_probabilities(inst, b)
        for k in range(inst.t):
            base = inst.ranks[p, k] - 1
            for q in range(inst.n):
                if q != p and 0.0 < theta[k, q] < 1.0:
                    points.add(base + float(theta[k, q]))
    return np.array(sorted(points))


def demand_curve(inst: MarketInstance, signals: Sequence[Signal], rule, p: int, b,
                 coupling: str = "independent") -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints of ``D_p(., b_-p)`` and the demand at each of them."""
    b = as_cutoff(inst, b).copy()
    xs = _breakpoints(inst, p, b, coupling)
    ys = np.empty_like(xs)
    for j, x in enumerate(xs):
        b[p] = x
        ys[j] = demand(inst, signals, rule, b, coupling).values[p]
    return xs, ys


def coordinate_update(inst: MarketInstance, signals: Sequence[Signal], rule, p, b,
                      coupling: str = "independent") -> float:
    """Largest ``b_p`` in [0, t] with ``D_p = M_p``, or ``t`` when ``D_p(t) <= M_p``.

    Demand is linear between consecutive breakpoints, so the root is found by
    locating the bracketing segment and interpolating; no iterative search.
    """
    p = inst.program_index(p)
    cap = inst.capacities[p]
    xs, ys = demand_curve(inst, signals, rule, p, b, coupling)
    slack = 1e-12 * max(1.0, cap)
    if ys[-1] <= cap + slack:
        return float(inst.t)
    below = np.flatnonzero(ys <= cap + slack)
    j = int(below[-1])
    if j == len(xs) - 1:
        return float(inst.t)
    x0, x1, y0, y1 = xs[j], xs[j + 1], ys[j], ys[j + 1]
    if y0 >= cap:
        return float(x0)
    return float(x0 + (cap - y0) / (y1 - y0) * (x1 - x0))


def apply_operator(inst, signals, rule, b, coupling: str = "independent",
                   scheme: str = "simultaneous") -> np.ndarray:
    """One sweep of the operator over all programs."""
    b = as_cutoff(inst, b)
    if scheme == "simultaneous":
        return np.array([coordinate_update(inst, signals, rule, p, b, coupling) for p in range(inst.n)])
    out = b.copy()
    for p in range(inst.n):
        out[p] = coordinate_update(inst, signals, rule, p, out, coupling)
    return out


def _iterate(inst, signals, rule, start: np.ndarray, cfg: ClearingConfig, direction: int) -> ClearingResult:
    b = start.astype(float)
    trajectory = [b.copy()]
    step = np.inf
    sweeps = 0
    converged = False
    for sweeps in range(1, cfg.max_sweeps + 1):
        new = apply_operator(inst, signals, rule, b, cfg.coupling, cfg.scheme)
        if direction < 0 and np.any(new > b + MONOTONE_TOL):
            raise AssertionError(f"iterates from above increased: {b} -> {new}")
        if direction > 0 and np.any(new < b - MONOTONE_TOL):
            raise AssertionError(f"iterates from below decreased: {b} -> {new}")
        step = float(np.max(np.abs(new - b)))
        b = new
        trajectory.append(b.copy())
        if step <= cfg.fixed_point_tol:
            converged = True
            break
    d = demand(inst, signals, rule, b, cfg.coupling).values
    result = ClearingResult(b, d, converged, sweeps, d - inst.capacities, step, tuple(trajectory))
    if not converged:
        raise NonConvergence(result)
    return result


def greatest_market_clearing(inst: MarketInstance, signals: Sequence[Signal], rule,
                             cfg: ClearingConfig = ClearingConfig()) -> ClearingResult:
    """Iterate from ``(t, ..., t)`` down to the greatest market-clearing cutoff."""
    return _iterate(inst, signals, rule, np.full(inst.n, float(inst.t)), cfg, -1)


def least_market_clearing(inst: MarketInstance, signals: Sequence[Signal], rule,
                          cfg: ClearingConfig = ClearingConfig()) -> ClearingResult:
    """Iterate from the zero cutoff up to the least fixed point."""
    return _iterate(inst, signals, rule, np.zeros(inst.n), cfg, +1)


@dataclass(frozen=True, eq=False)
class ClearingCheck:
    demand: np.ndarray
    violations: tuple[tuple[int, str, float, float], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def verify_market_clearing(inst: MarketInstance, signals: Sequence[Signal], rule, b,
                           tol: float = 1e-6, coupling: str = "independent") -> ClearingCheck:
    """Demand never exceeds capacity, and meets it exactly wherever ``b_p < t``.

    Violations are ``(program, "over" | "under", demand, capacity)``.
    """
    b = as_cutoff(inst, b)
    d = demand(inst, signals, rule, b, coupling).values
    found = []
    for p in range(inst.n):
        cap = inst.capacities[p]
        if d[p] > cap + tol:
            found.append((p, "over", float(d[p]), float(cap)))
        elif b[p] < inst.t - tol and abs(d[p] - cap) > tol:
            found.append((p, "under", float(d[p]), float(cap)))
    return ClearingCheck(d, tuple(found))


@dataclass(frozen=True, eq=False)
class RuralHospitalReport:
    demand_gap: float
    lottery_gaps: dict[int, float]
    tol: float

    @property
    def ok(self) -> bool:
        return self.demand_gap <= self.tol and all(g <= self.tol for g in self.lottery_gaps.values())

    def __bool__(self) -> bool:
        return self.ok


def rural_hospital_check(inst: MarketInstance, signals: Sequence[Signal], rule, b, b_other,
                         tol: float = 1e-9, coupling: str = "independent",
                         clearing_tol: float = 1e-6) -> RuralHospitalReport:
    """Compare two market-clearing cutoffs: equal demand, equal lotteries where under-filled."""
    for cut in (b, b_other):
        check = verify_market_clearing(inst, signals, rule, cut, clearing_tol, coupling)
        if not check.ok:
            raise NotMarketClearing(f"cutoff {np.asarray(cut).tolist()} does not clear: {check.violations}")
    left = student_outcomes(inst, signals, rule, b, coupling)
    right = student_outcomes(inst, signals, rule, b_other, coupling)
    d_left = left[:, :inst.n].sum(axis=0)
    d_right = right[:, :inst.n].sum(axis=0)
    gaps = {}
    for p in range(inst.n):
        if d_left[p] < inst.capacities[p] - clearing_tol:
            gaps[p] = float(np.max(np.abs(left[:, p] - right[:, p])))
    return RuralHospitalReport(float(np.max(np.abs(d_left - d_right))), gaps, tol)


@dataclass(frozen=True, eq=False)
class DeterministicScan:
    checked: tuple[tuple[tuple[int, ...], np.ndarray, bool], ...]

    @property
    def clearing(self) -> list[tuple[int, ...]]:
        return [c for c, _, ok in self.checked if ok]

    @property
    def none_clear(self) -> bool:
        return not self.clearing


def no_deterministic_clearing_witness(inst: MarketInstance, signals: Sequence[Signal], rule,
                                      tol: float = 1e-9, max_points: int = 10**6) -> DeterministicScan:
    """Test every integer cutoff in ``{0..t}^n`` against the clearing definition."""
    size = (inst.t + 1) ** inst.n
    if size > max_points:
        raise InstanceTooLarge(f"{size} integer cutoffs exceed the limit of {max_points}")
    checked = []
    for cutoff in itertools.product(range(inst.t + 1), repeat=inst.n):
        check = verify_market_clearing(inst, signals, rule, cutoff, tol)
        checked.append((cutoff, check.demand, check.ok))
    return DeterministicScan(tuple(checked))
