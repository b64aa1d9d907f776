"""Dense two-phase tableau simplex for the small programs used in this package.

The problems solved here (garbling feasibility, one student's allocation) have
at most a few hundred variables, so a dense tableau is adequate. Pivot
selection follows Dantzig's rule until a degenerate pivot is seen, then
switches to Bland's rule for the rest of the phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``lower <= x <= upper``.

    ``objective`` is maximized by :func:`maximize` and ignored by
    :func:`feasible`. Missing bounds default to ``0 <= x < inf``.
    """

    n_vars: int
    objective: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        n = self.n_vars
        for name in ("objective", "b_eq", "b_ub", "lower", "upper"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float).reshape(-1)
                object.__setattr__(self, name, val)
        for A, b, tag in ((self.A_eq, self.b_eq, "eq"), (self.A_ub, self.b_ub, "ub")):
            if (A is None) != (b is None):
                raise ValueError(f"A_{tag} and b_{tag} must be given together")
            if A is not None:
                A = np.atleast_2d(np.asarray(A, dtype=float))
                object.__setattr__(self, f"A_{tag}", A)
                if A.shape != (len(b), n):
                    raise ValueError(f"A_{tag} has shape {A.shape}, expected {(len(b), n)}")
        if self.objective is not None and self.objective.shape != (n,):
            raise ValueError(f"objective has length {len(self.objective)}, expected {n}")
        lo = np.zeros(n) if self.lower is None else self.lower
        hi = np.full(n, np.inf) if self.upper is None else self.upper
        if lo.shape != (n,) or hi.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def residual(self, x) -> float:
        """Largest constraint violation of ``x``, evaluated directly."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.A_eq is not None:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0)))
        if self.A_ub is not None:
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub, initial=0.0)))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        finite = np.isfinite(self.upper)
        if finite.any():
            worst = max(worst, float(np.max(x[finite] - self.upper[finite], initial=0.0)))
        return worst


@dataclass(frozen=True, eq=False)
class LPResult:
    status: str  # "optimal", "feasible", "infeasible" or "unbounded"
    x: np.ndarray | None = None
    value: float | None = None
    residual: float = 0.0
    iterations: int = 0

    @property
    def success(self) -> bool:
        return self.status in ("optimal", "feasible")


def _standard_form(lp: LinearProgram):
    """Rewrite as ``min c.y, A y = b, y >= 0``; return the map back to x."""
    n = lp.n_vars
    lo, hi = lp.lower, lp.upper
    free = ~np.isfinite(lo)
    # x = shift + M @ y
    cols = []
    for j in range(n):
        if free[j]:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
    ny = len(cols)
    M = np.zeros((n, ny))
    for c, (j, s) in enumerate(cols):
        M[j, c] = s
    shift = np.where(free, 0.0, lo)

    rows_eq = []
    rhs_eq = []
    rows_ub = []
    rhs_ub = []
    if lp.A_eq is not None:
        rows_eq.append(lp.A_eq @ M)
        rhs_eq.append(lp.b_eq - lp.A_eq @ shift)
    if lp.A_ub is not None:
        rows_ub.append(lp.A_ub @ M)
        rhs_ub.append(lp.b_ub - lp.A_ub @ shift)
    bounded = np.flatnonzero(np.isfinite(hi))
    if bounded.size:
        rows_ub.append(M[bounded])
        rhs_ub.append(hi[bounded] - shift[bounded])

    A_eq = np.vstack(rows_eq) if rows_eq else np.zeros((0, ny))
    b_eq = np.concatenate(rhs_eq) if rhs_eq else np.zeros(0)
    A_ub = np.vstack(rows_ub) if rows_ub else np.zeros((0, ny))
    b_ub = np.concatenate(rhs_ub) if rhs_ub else np.zeros(0)
    n_slack = A_ub.shape[0]
    A = np.block([
        [A_eq, np.zeros((A_eq.shape[0], n_slack))],
        [A_ub, np.eye(n_slack)],
    ])
    b = np.concatenate([b_eq, b_ub])
    c = np.zeros(ny + n_slack)
    if lp.objective is not None:
        c[:ny] = lp.objective @ M
    return A, b, c, M, shift, ny


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _iterate(T, basis, allowed, tol, max_iter):
    """Minimize the reduced-cost row of ``T`` over columns in ``allowed``."""
    bland = False
    for it in range(max_iter):
        cost = T[-1, :-1]
        entering = [j for j in allowed if cost[j] < -tol]
        if not entering:
            return "optimal", it
        col = min(entering) if bland else min(entering, key=lambda j: (cost[j], j))
        column = T[:-1, col]
        positive = column > tol
        if not positive.any():
            return "unbounded", it
        ratios = np.full(column.shape, np.inf)
        ratios[positive] = T[:-1, -1][positive] / column[positive]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + tol)
        row = min(tied, key=lambda r: basis[r])
        if best <= tol:
            bland = True
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def _solve(lp: LinearProgram, tol: float, phase_two: bool, max_iter: int = 50_000) -> LPResult:
    A, b, c, M, shift, ny = _standard_form(lp)
    m, nv = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase one: artificial basis
    T = np.zeros((m + 1, nv + m + 1))
    T[:m, :nv] = A
    T[:m, nv:nv + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :nv] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(nv, nv + m))
    _, it1 = _iterate(T, basis, range(nv + m), tol, max_iter)
    infeas = -T[-1, -1]
    if infeas > tol * max(1.0, float(b.sum())):
        return LPResult("infeasible", residual=float(infeas), iterations=it1)

    # push zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= nv:
            cand = np.flatnonzero(np.abs(T[r, :nv]) > tol)
            if cand.size:
                _pivot(T, r, int(cand[0]))
                basis[r] = int(cand[0])
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(nv)) + [-1]], np.zeros(nv + 1)])
    basis = [basis[r] for r in keep]

    it2 = 0
    status = "feasible"
    if phase_two:
        T[-1, :nv] = c
        for r, j in enumerate(basis):
            if c[j] != 0:
                T[-1] -= c[j] * T[r]
        status, it2 = _iterate(T, basis, range(nv), tol, max_iter)
        if status == "unbounded":
            return LPResult("unbounded", iterations=it1 + it2)

    y = np.zeros(nv)
    for r, j in enumerate(basis):
        y[j] = T[r, -1]
    y = np.maximum(y, 0.0)
    x = shift + M @ y[:ny]
    value = None if lp.objective is None else float(lp.objective @ x)
    return LPResult(status, x=x, value=value, residual=lp.residual(x), iterations=it1 + it2)


def feasible(lp: LinearProgram, tol: float = DEFAULT_TOL) -> LPResult:
    """Phase-one simplex. ``status`` is "feasible" (with a point) or "infeasible"."""
    return _solve(lp, tol, phase_two=False)


def maximize(lp: LinearProgram, tol: float = DEFAULT_TOL) -> LPResult:
    """Maximize ``lp.objective``; ``status`` is "optimal", "infeasible" or "unbounded"."""
    if lp.objective is None:
        raise ValueError("maximize needs an objective")
    flipped = LinearProgram(
        lp.n_vars, -lp.objective, lp.A_eq, lp.b_eq, lp.A_ub, lp.b_ub, lp.lower, lp.upper
    )
    res = _solve(flipped, tol, phase_two=True)
    if res.x is None:
        return res
    return LPResult(res.status, res.x, float(lp.objective @ res.x), res.residual, res.iterations)
