"""Simplex solver checks against brute-force vertex enumeration."""

import itertools

import numpy as np
import pytest

from secgames.core import MalformedInputError
from secgames.lp import LinearProgram, solve_lp


def test_single_variable_bound():
    p = LinearProgram.build(c=[1.0], a_ub=[[1.0]], b_ub=[3.0])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.z[0] == pytest.approx(3.0, abs=1e-9)
    assert sol.value == pytest.approx(3.0, abs=1e-9)


def test_simplex_face_value():
    p = LinearProgram.build(c=[1.0, 1.0], a_ub=[[1.0, 1.0]], b_ub=[1.0])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(1.0, abs=1e-9)
    assert np.all(sol.z >= -1e-12)


def test_contradictory_bounds_infeasible():
    # x1 >= 2 encoded as -x1 <= -2, together with x1 <= 1
    p = LinearProgram.build(c=[1.0], a_ub=[[-1.0], [1.0]], b_ub=[-2.0, 1.0])
    assert solve_lp(p).status == "infeasible"


def test_unbounded():
    p = LinearProgram.build(c=[1.0], a_ub=None, b_ub=None)
    assert solve_lp(p).status == "unbounded"


def test_equality_and_free_variable():
    # maximize -|s| style: maximize -s with s free, s == 2.5
    p = LinearProgram.build(c=[-1.0], a_eq=[[1.0]], b_eq=[2.5],
                            lower=[-np.inf])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.z[0] == pytest.approx(2.5, abs=1e-9)


def test_upper_bounds_and_negative_lower():
    # maximize x + y, -1 <= x <= 2, 0 <= y <= 0.5
    p = LinearProgram.build(c=[1.0, 1.0], lower=[-1.0, 0.0], upper=[2.0, 0.5])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(2.5, abs=1e-9)


def test_dimension_mismatch_raises():
    p = LinearProgram.build(c=[1.0, 2.0], a_ub=[[1.0]], b_ub=[1.0])
    with pytest.raises(MalformedInputError):
        solve_lp(p)


def _vertex_oracle(c, a_rows, b_rows, n):
    """Optimal value by enumerating vertices of {A z <= b, z >= 0}.

    Candidate vertices are intersections of n active constraints drawn
    from the inequality rows plus the coordinate planes.
    """
    rows = [np.asarray(r, dtype=float) for r in a_rows]
    rhs = list(b_rows)
    for j in range(n):
        e = np.zeros(n)
        e[j] = -1.0
        rows.append(e)        # -z_j <= 0
        rhs.append(0.0)
    rows = np.array(rows)
    rhs = np.array(rhs)
    best = -np.inf
    best_z = None
    for combo in itertools.combinations(range(len(rows)), n):
        mat = rows[list(combo)]
        if abs(np.linalg.det(mat)) < 1e-10:
            continue
        z = np.linalg.solve(mat, rhs[list(combo)])
        if np.all(rows @ z <= rhs + 1e-8):
            val = float(np.asarray(c) @ z)
            if val > best:
                best, best_z = val, z
    return best, best_z


@pytest.mark.parametrize("trial", range(40))
def test_random_lp_matches_vertex_enumeration(trial):
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(2, 6))
    k = int(rng.integers(1, 9))
    a = rng.normal(size=(k, n))
    interior = rng.uniform(0.2, 1.5, size=n)
    b = a @ interior + rng.uniform(0.1, 1.0, size=k)
    # box rows keep the feasible region bounded
    a = np.vstack([a, np.eye(n)])
    b = np.concatenate([b, np.full(n, 10.0)])
    c = rng.normal(size=n)

    sol = solve_lp(LinearProgram.build(c=c, a_ub=a, b_ub=b))
    assert sol.status == "optimal"
    oracle_value, _ = _vertex_oracle(c, a, b, n)
    assert sol.value == pytest.approx(oracle_value, abs=1e-6)
    # primal feasibility of the reported point
    assert np.all(a @ sol.z <= b + 1e-8)
    assert np.all(sol.z >= -1e-8)
    assert sol.value == pytest.approx(float(c @ sol.z), abs=1e-8)


@pytest.mark.parametrize("trial", range(15))
def test_weak_duality_spot_check(trial):
    rng = np.random.default_rng(7000 + trial)
    n = int(rng.integers(2, 5))
    k = int(rng.integers(2, 7))
    a = rng.normal(size=(k, n))
    interior = rng.uniform(0.2, 1.0, size=n)
    b = a @ interior + rng.uniform(0.1, 0.8, size=k)
    a = np.vstack([a, np.eye(n)])
    b = np.concatenate([b, np.full(n, 5.0)])
    c = rng.normal(size=n)
    sol = solve_lp(LinearProgram.build(c=c, a_ub=a, b_ub=b))
    assert sol.status == "optimal"
    # random feasible points never beat the reported optimum
    for _ in range(25):
        cand = rng.uniform(0.0, 1.0, size=n) * interior
        if np.all(a @ cand <= b + 1e-12):
            assert float(c @ cand) <= sol.value + 1e-8


def test_random_lps_with_equalities():
    rng = np.random.default_rng(42)
    for _ in range(25):
        n = int(rng.integers(2, 5))
        a_eq = rng.normal(size=(1, n))
        interior = rng.uniform(0.2, 1.2, size=n)
        b_eq = a_eq @ interior
        a_ub = np.eye(n)
        b_ub = np.full(n, 4.0)
        c = rng.normal(size=n)
        sol = solve_lp(LinearProgram.build(c=c, a_ub=a_ub, b_ub=b_ub,
                                           a_eq=a_eq, b_eq=b_eq))
        assert sol.status == "optimal"
        assert np.allclose(a_eq @ sol.z, b_eq, atol=1e-8)
        assert np.all(sol.z >= -1e-8)
