"""Dense linear-program solver (two-phase tableau simplex, Bland's rule).

Problem sizes in this package stay below a few dozen variables, so a
robust dense tableau beats anything clever.  Bland's smallest-index
pivoting rule is used in both phases, which guarantees termination even
on degenerate tableaus.

Problems are stated as

    maximize    c . z
    subject to  A_ub . z <= b_ub
                A_eq . z == b_eq
                lower <= z <= upper   (entries may be -inf / +inf)

Free variables are split into positive parts; finite bounds are shifted
or reflected away before the tableau is built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MalformedInputError

_PIVOT_TOL = 1e-10
_FEAS_TOL = 1e-8


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, c, a_ub=None, b_ub=None, a_eq=None, b_eq=None,
              lower=None, upper=None) -> "LinearProgram":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        n = c.size
        a_ub = np.zeros((0, n)) if a_ub is None else np.atleast_2d(np.asarray(a_ub, dtype=float))
        b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
        a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
        lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
        return cls(c, a_ub, b_ub, a_eq, b_eq, lower, upper)

    def check(self) -> None:
        n = self.c.size
        if self.a_ub.shape[1] != n or self.a_eq.shape[1] != n:
            raise MalformedInputError("constraint column count does not match variable count")
        if self.a_ub.shape[0] != self.b_ub.size or self.a_eq.shape[0] != self.b_eq.size:
            raise MalformedInputError("constraint row count does not match rhs length")
        if self.lower.size != n or self.upper.size != n:
            raise MalformedInputError("bound vectors do not match variable count")
        for block in (self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq):
            if not np.all(np.isfinite(block)):
                raise MalformedInputError("coefficients must be finite")


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    z: np.ndarray | None
    value: float | None


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and abs(tableau[r, col]) > 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]
    basis[row] = col


def _simplex(tableau: np.ndarray, basis: np.ndarray, n_cols: int) -> str:
    """Maximize the objective encoded in the last tableau row (Bland's rule).

    Reduced costs are kept in the last row as (c_B B^-1 A - c); a column
    with a negative entry improves the objective.  Returns "optimal" or
    "unbounded".
    """
    m = tableau.shape[0] - 1
    while True:
        obj = tableau[-1, :n_cols]
        entering = -1
        for j in range(n_cols):
            if obj[j] < -_PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = tableau[:m, entering]
        best_ratio, leaving = np.inf, -1
        for r in range(m):
            if col[r] > _PIVOT_TOL:
                ratio = tableau[r, -1] / col[r]
                # ties broken by smallest row index: require strict improvement
                if ratio < best_ratio - 1e-12:
                    best_ratio, leaving = ratio, r
        if leaving < 0:
            return "unbounded"
        _pivot(tableau, basis, leaving, entering)


def solve_lp(problem: LinearProgram) -> LpSolution:
    """Solve a dense LP; infeasible/unbounded are statuses, never exceptions."""
    problem.check()
    c, lower, upper = problem.c, problem.lower, problem.upper
    n = c.size

    # Rewrite every variable as one or two non-negative columns.
    # columns[j] -> list of (original index, sign); offset restores shifts.
    col_map: list[tuple[int, float]] = []
    offset = np.zeros(n)
    extra_ub_rows: list[np.ndarray] = []
    extra_ub_rhs: list[float] = []
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            col_map.append((j, 1.0))
            if np.isfinite(hi):
                if hi < lo - _FEAS_TOL:
                    return LpSolution("infeasible", None, None)
                row = np.zeros(n)
                row[j] = 1.0
                extra_ub_rows.append(row)
                extra_ub_rhs.append(hi)
        elif np.isfinite(hi):
            offset[j] = hi
            col_map.append((j, -1.0))
        else:
            col_map.append((j, 1.0))
            col_map.append((j, -1.0))

    a_ub = problem.a_ub
    b_ub = problem.b_ub
    if extra_ub_rows:
        a_ub = np.vstack([a_ub, np.array(extra_ub_rows)])
        b_ub = np.concatenate([b_ub, np.array(extra_ub_rhs)])

    n_std = len(col_map)

    def to_std(mat: np.ndarray) -> np.ndarray:
        out = np.zeros((mat.shape[0], n_std))
        for idx, (j, sign) in enumerate(col_map):
            out[:, idx] = sign * mat[:, j]
        return out

    c_std = np.array([sign * c[j] for j, sign in col_map])
    a_ub_std = to_std(a_ub)
    b_ub_std = b_ub - a_ub @ offset
    a_eq_std = to_std(problem.a_eq)
    b_eq_std = problem.b_eq - problem.a_eq @ offset

    n_ub = a_ub_std.shape[0]
    n_eq = a_eq_std.shape[0]
    m = n_ub + n_eq

    # Equalities first, then inequalities with slack columns appended.
    body = np.zeros((m, n_std + n_ub))
    rhs = np.zeros(m)
    body[:n_eq, :n_std] = a_eq_std
    rhs[:n_eq] = b_eq_std
    body[n_eq:, :n_std] = a_ub_std
    body[n_eq:, n_std + np.arange(n_ub)] = np.eye(n_ub)
    rhs[n_eq:] = b_ub_std

    neg = rhs < 0
    body[neg] *= -1.0
    rhs[neg] *= -1.0

    # Phase 1: artificial columns for every row without a ready basic column.
    n_work = body.shape[1]
    basis = np.full(m, -1, dtype=int)
    needs_artificial = []
    for r in range(m):
        if r >= n_eq and not neg[r]:
            basis[r] = n_std + (r - n_eq)  # untouched slack is basic
        else:
            needs_artificial.append(r)
    n_art = len(needs_artificial)
    tableau = np.zeros((m + 1, n_work + n_art + 1))
    tableau[:m, :n_work] = body
    tableau[:m, -1] = rhs
    for idx, r in enumerate(needs_artificial):
        tableau[r, n_work + idx] = 1.0
        basis[r] = n_work + idx

    if n_art:
        # Objective row: minimize sum of artificials == maximize -(sum).
        tableau[-1, :] = 0.0
        for r in needs_artificial:
            tableau[-1, : n_work + n_art] -= tableau[r, : n_work + n_art]
            tableau[-1, -1] -= tableau[r, -1]
        tableau[-1, n_work:n_work + n_art] = 0.0
        # artificials are excluded from entering candidates (columns >= n_work)
        status = _simplex(tableau, basis, n_work)
        if status != "optimal" or tableau[-1, -1] < -_FEAS_TOL:
            return LpSolution("infeasible", None, None)
        # Pivot any zero-level artificial out of the basis, or drop its row.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n_work:
                pivot_col = -1
                for j in range(n_work):
                    if abs(tableau[r, j]) > _PIVOT_TOL:
                        pivot_col = j
                        break
                if pivot_col >= 0:
                    _pivot(tableau, basis, r, pivot_col)
                else:
                    keep[r] = False
        if not np.all(keep):
            rows = np.concatenate([np.flatnonzero(keep), [m]])
            tableau = tableau[rows]
            basis = basis[keep]
            m = basis.size

    # Phase 2: restore the real objective.
    tableau = np.hstack([tableau[:, :n_work], tableau[:, -1:]])
    tableau[-1, :] = 0.0
    tableau[-1, :n_std] = -c_std
    for r in range(m):
        if tableau[-1, basis[r]] != 0.0:
            tableau[-1] -= tableau[-1, basis[r]] * tableau[r]
    status = _simplex(tableau, basis, n_work)
    if status == "unbounded":
        return LpSolution("unbounded", None, None)

    x_std = np.zeros(n_work)
    for r in range(m):
        x_std[basis[r]] = tableau[r, -1]
    z = offset.copy()
    for idx, (j, sign) in enumerate(col_map):
        z[j] += sign * x_std[idx]
    return LpSolution("optimal", z, float(problem.c @ z))
