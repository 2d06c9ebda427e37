"""Equilibria of finite-horizon games with two-sided private types.

The solver alternates two passes until a joint fixed point:

* backward: for fixed beliefs, solve one bilinear program per (stage,
  state) from the last stage down, chaining utility-to-go values
  through the deterministic transition.  A strategy pair solves the
  stage if and only if the program's optimum is zero (the scalar
  functions s and w absorb each side's best-response value), so the
  program is attacked by alternating linear ascent from several
  starts and every candidate is certified by exact deviation gaps.
* forward: for a fixed strategy profile, walk the action tree from the
  root, update both players' type beliefs by Bayes' rule at every
  observed action, and aggregate per-(stage, state) beliefs as the
  reach-probability-weighted average over the histories that land
  there.  The worst disagreement between a node belief and its state
  aggregate is reported, so a lossy state abstraction is visible.

Non-convergence of the loop is a first-class result (reported as
evidence that no equilibrium of this form exists), never an exception.

A notational caution: the per-stage program weighs the incentive
constraints of player i's types by the *opponent's* belief about
player i.  Types the opponent has ruled out contribute nothing to the
program, so after each stage solve such zero-weight types are handed
an exact best response; their incentives are then certified too.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (BeliefSystem, FiniteDistribution, MalformedInputError,
                   MultiStageGame, NodeKey, SolverError, StageGame,
                   StrategyProfile, validate_game, _readonly)
from .lp import LinearProgram, solve_lp

STAGE_GAP_TOL = 1e-6
_OBJ_TOL = 1e-6
_EXACT_TOL = 1e-8
_ZERO_BELIEF = 1e-12


@dataclass(frozen=True)
class ValueFunction:
    """Utility-to-go per (player, stage, state, own type); zero past the end."""

    v1: tuple[np.ndarray, ...]
    v2: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "v1", tuple(_readonly(a) for a in self.v1))
        object.__setattr__(self, "v2", tuple(_readonly(a) for a in self.v2))


@dataclass(frozen=True)
class BilinearStageSolution:
    """One (stage, state) equilibrium candidate with its certificates."""

    sigma1: np.ndarray      # (n1, m1)
    sigma2: np.ndarray      # (n2, m2)
    s: np.ndarray           # scalar function over defender types
    w: np.ndarray           # scalar function over user types
    objective: float
    gaps1: np.ndarray
    gaps2: np.ndarray
    converged: bool
    start_index: int
    alternations: int


@dataclass(frozen=True)
class EpsilonReport:
    """Per-player, per-type distance from the best-response value."""

    eps1: np.ndarray
    eps2: np.ndarray
    belief_violation: float
    consistent: bool


@dataclass(frozen=True)
class PbneSolution:
    profile: StrategyProfile
    beliefs: BeliefSystem
    values: ValueFunction
    epsilon: EpsilonReport
    iterations: int
    residual_trace: tuple[tuple[float, float], ...]
    stage_gap: float
    converged: bool = True


@dataclass(frozen=True)
class NonConvergenceReport:
    iterations: int
    residual_trace: tuple[tuple[float, float], ...]
    last_profile: StrategyProfile
    last_beliefs: BeliefSystem
    final_residuals: tuple[float, float]
    converged: bool = False


def belief_update(prior, opponent_strategy, observed: int
                  ) -> tuple[FiniteDistribution, bool]:
    """One Bayes step on the opponent's type after seeing one action.

    ``opponent_strategy[t, a]`` is the probability the opponent of type
    ``t`` plays ``a``.  When the observed action has zero probability
    under every type (off path), the prior is kept and flagged.
    """
    p = np.asarray(getattr(prior, "weights", prior), dtype=float)
    sig = np.asarray(opponent_strategy, dtype=float)
    if sig.shape[0] != p.size:
        raise MalformedInputError("opponent strategy rows must match type count")
    joint = p * sig[:, observed]
    total = joint.sum()
    if total <= 0.0:
        return FiniteDistribution.unchecked(p.copy()), False
    return FiniteDistribution(joint / total), True


# ---------------------------------------------------------------------------
# Per-stage bilinear program.
# ---------------------------------------------------------------------------

def _stage_tensors(stage: StageGame, x: int, v1_next, v2_next):
    """Stage payoff plus continuation, per (a1, a2, t1, t2)."""
    p1 = stage.payoff1.values[x]
    p2 = stage.payoff2.values[x]
    n1, n2 = p1.shape[2], p1.shape[3]
    nxt = stage.transition_table[x]
    v1 = np.zeros((len(stage.next_states), n1)) if v1_next is None else np.asarray(v1_next)
    v2 = np.zeros((len(stage.next_states), n2)) if v2_next is None else np.asarray(v2_next)
    t1 = p1 + v1[nxt][:, :, :, None]
    t2 = p2 + v2[nxt][:, :, None, :]
    return t1, t2, stage.payoff1.feasible[x], stage.payoff2.feasible[x]


def _lp_for_side1(t1, t2, feas1, feas2, b1, b2, sigma2):
    """LP in (sigma1, s, w) with the user's strategy held fixed."""
    m1, m2, n1, n2 = t1.shape
    var = [(t, a) for t in range(n1) for a in range(m1) if feas1[t, a]]
    col = {v: i for i, v in enumerate(var)}
    n_sig = len(var)
    n_vars = n_sig + n1 + n2        # sigma1, s, w

    total = t1 + t2
    # objective coefficient of sigma1(t1, a1)
    obj_sig = np.einsum("abst,t,tb->sa", total, b2, sigma2)
    c = np.zeros(n_vars)
    for (t, a), i in col.items():
        c[i] = b1[t] * obj_sig[t, a]
    c[n_sig:n_sig + n1] = b1
    c[n_sig + n1:] = b2

    a_ub, b_ub = [], []
    # user best-response bound: for each (t2, feasible a2)
    coef_a = np.einsum("abst,s->sabt", t2, b1)     # (t1, a1, a2, t2) scaled by b1
    for t in range(n2):
        for a2 in range(m2):
            if not feas2[t, a2]:
                continue
            row = np.zeros(n_vars)
            for (tt, aa), i in col.items():
                row[i] = coef_a[tt, aa, a2, t]
            row[n_sig + n1 + t] = 1.0
            a_ub.append(row)
            b_ub.append(0.0)
    # defender best-response bound: s(t1) <= -(value of each pure a1)
    pinned = np.einsum("abst,t,tb->sa", t1, b2, sigma2)
    for t in range(n1):
        for a1 in range(m1):
            if not feas1[t, a1]:
                continue
            row = np.zeros(n_vars)
            row[n_sig + t] = 1.0
            a_ub.append(row)
            b_ub.append(-pinned[t, a1])

    a_eq, b_eq = [], []
    for t in range(n1):
        row = np.zeros(n_vars)
        for a in range(m1):
            if feas1[t, a]:
                row[col[(t, a)]] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)

    lower = np.concatenate([np.zeros(n_sig), np.full(n1 + n2, -np.inf)])
    sol = solve_lp(LinearProgram.build(c, a_ub, b_ub, a_eq, b_eq, lower=lower))
    if sol.status != "optimal":
        raise SolverError(f"stage LP (defender side) returned {sol.status}")
    sigma1 = np.zeros((n1, m1))
    for (t, a), i in col.items():
        sigma1[t, a] = max(0.0, sol.z[i])
    sigma1 /= sigma1.sum(axis=1, keepdims=True)
    s = sol.z[n_sig:n_sig + n1].copy()
    w = sol.z[n_sig + n1:].copy()
    return sigma1, s, w, float(sol.value)


def _lp_for_side2(t1, t2, feas1, feas2, b1, b2, sigma1):
    """LP in (sigma2, s, w) with the defender's strategy held fixed."""
    m1, m2, n1, n2 = t1.shape
    var = [(t, a) for t in range(n2) for a in range(m2) if feas2[t, a]]
    col = {v: i for i, v in enumerate(var)}
    n_sig = len(var)
    n_vars = n_sig + n1 + n2

    total = t1 + t2
    obj_sig = np.einsum("abst,s,sa->tb", total, b1, sigma1)
    c = np.zeros(n_vars)
    for (t, a), i in col.items():
        c[i] = b2[t] * obj_sig[t, a]
    c[n_sig:n_sig + n1] = b1
    c[n_sig + n1:] = b2

    a_ub, b_ub = [], []
    coef_b = np.einsum("abst,t->tbas", t1, b2)      # (t2, a2, a1, t1) scaled by b2
    for t in range(n1):
        for a1 in range(m1):
            if not feas1[t, a1]:
                continue
            row = np.zeros(n_vars)
            for (tt, aa), i in col.items():
                row[i] = coef_b[tt, aa, a1, t]
            row[n_sig + t] = 1.0
            a_ub.append(row)
            b_ub.append(0.0)
    pinned = np.einsum("abst,s,sa->tb", t2, b1, sigma1)
    for t in range(n2):
        for a2 in range(m2):
            if not feas2[t, a2]:
                continue
            row = np.zeros(n_vars)
            row[n_sig + n1 + t] = 1.0
            a_ub.append(row)
            b_ub.append(-pinned[t, a2])

    a_eq, b_eq = [], []
    for t in range(n2):
        row = np.zeros(n_vars)
        for a in range(m2):
            if feas2[t, a]:
                row[col[(t, a)]] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)

    lower = np.concatenate([np.zeros(n_sig), np.full(n1 + n2, -np.inf)])
    sol = solve_lp(LinearProgram.build(c, a_ub, b_ub, a_eq, b_eq, lower=lower))
    if sol.status != "optimal":
        raise SolverError(f"stage LP (user side) returned {sol.status}")
    sigma2 = np.zeros((n2, m2))
    for (t, a), i in col.items():
        sigma2[t, a] = max(0.0, sol.z[i])
    sigma2 /= sigma2.sum(axis=1, keepdims=True)
    s = sol.z[n_sig:n_sig + n1].copy()
    w = sol.z[n_sig + n1:].copy()
    return sigma2, s, w, float(sol.value)


def stage_deviation_gaps(t1, t2, feas1, feas2, b1, b2, sigma1, sigma2):
    """Exact per-type best-response gaps at a stage profile."""
    pure1 = np.einsum("abst,t,tb->sa", t1, b2, sigma2)      # (t1, a1)
    pure2 = np.einsum("abst,s,sa->tb", t2, b1, sigma1)      # (t2, a2)
    ach1 = np.einsum("sa,sa->s", pure1, sigma1)
    ach2 = np.einsum("tb,tb->t", pure2, sigma2)
    best1 = np.where(feas1, pure1, -np.inf).max(axis=1)
    best2 = np.where(feas2, pure2, -np.inf).max(axis=1)
    return np.maximum(best1 - ach1, 0.0), np.maximum(best2 - ach2, 0.0)


def _stage_objective(t1, t2, b1, b2, sigma1, sigma2, s, w) -> float:
    total = np.einsum("abst,s,t,sa,tb->", t1 + t2, b1, b2, sigma1, sigma2)
    return float(total + b2 @ w + b1 @ s)


def _evaluate_candidate(t1, t2, feas1, feas2, b1, b2, sigma1, sigma2,
                        start_index, alternations):
    """Repair zero-weight types, compute certificates, assemble a solution."""
    pure1 = np.einsum("abst,t,tb->sa", t1, b2, sigma2)
    pure2 = np.einsum("abst,s,sa->tb", t2, b1, sigma1)
    sigma1 = sigma1.copy()
    sigma2 = sigma2.copy()
    for t in np.flatnonzero(np.asarray(b1) <= _ZERO_BELIEF):
        best = np.where(feas1[t], pure1[t], -np.inf).argmax()
        sigma1[t] = 0.0
        sigma1[t, best] = 1.0
    for t in np.flatnonzero(np.asarray(b2) <= _ZERO_BELIEF):
        pure2_t = np.einsum("abs,s,sa->b", t2[:, :, :, t], b1, sigma1)
        best = np.where(feas2[t], pure2_t, -np.inf).argmax()
        sigma2[t] = 0.0
        sigma2[t, best] = 1.0
    gaps1, gaps2 = stage_deviation_gaps(t1, t2, feas1, feas2, b1, b2, sigma1, sigma2)
    # tight scalar functions: the negated best-response values
    pure1 = np.einsum("abst,t,tb->sa", t1, b2, sigma2)
    pure2 = np.einsum("abst,s,sa->tb", t2, b1, sigma1)
    s = -np.where(feas1, pure1, -np.inf).max(axis=1)
    w = -np.where(feas2, pure2, -np.inf).max(axis=1)
    obj = _stage_objective(t1, t2, b1, b2, sigma1, sigma2, s, w)
    converged = bool(gaps1.max(initial=0.0) <= STAGE_GAP_TOL
                     and gaps2.max(initial=0.0) <= STAGE_GAP_TOL
                     and abs(obj) <= _OBJ_TOL)
    return BilinearStageSolution(sigma1, sigma2, s, w, obj, gaps1, gaps2,
                                 converged, start_index, alternations)


def _best_response_rows(pure, feas) -> np.ndarray:
    """Per-type pure best response (lowest index on ties)."""
    rows = np.zeros_like(pure)
    masked = np.where(feas, pure, -np.inf)
    rows[np.arange(pure.shape[0]), masked.argmax(axis=1)] = 1.0
    return rows


def _alternate_from(t1, t2, feas1, feas2, b1, b2, sigma2_start, start_index,
                    max_alternations=200, max_escapes=3):
    """Alternating linear ascent from one user-side strategy.

    The objective is non-decreasing within each ascent segment; a
    stalled segment below zero is restarted from an exact best-response
    step, which may leave the stationary basin.
    """
    sigma2 = sigma2_start
    prev_obj = -np.inf
    sigma1 = None
    escapes = 0
    it = 0
    while it < max_alternations:
        it += 1
        sigma1, s, w, obj1 = _lp_for_side1(t1, t2, feas1, feas2, b1, b2, sigma2)
        sigma2, s, w, obj2 = _lp_for_side2(t1, t2, feas1, feas2, b1, b2, sigma1)
        if obj2 < prev_obj - 1e-7:
            raise SolverError("alternating ascent lost monotonicity")
        if obj2 >= -1e-10:
            break
        if abs(obj2 - prev_obj) <= 1e-12:
            if escapes >= max_escapes:
                break
            escapes += 1
            pure2 = np.einsum("abst,s,sa->tb", t2, b1, sigma1)
            sigma2 = _best_response_rows(pure2, feas2)
            prev_obj = -np.inf        # new segment, fresh monotonicity baseline
            continue
        prev_obj = obj2
    return _evaluate_candidate(t1, t2, feas1, feas2, b1, b2, sigma1, sigma2,
                               start_index, it)


def _uniform_rows(feas) -> np.ndarray:
    rows = feas.astype(float)
    return rows / rows.sum(axis=1, keepdims=True)


def _random_rows(feas, rng) -> np.ndarray:
    # Dirichlet(0.3) spreads starts toward the simplex boundary
    raw = rng.gamma(0.3, size=feas.shape) * feas
    totals = raw.sum(axis=1, keepdims=True)
    totals[totals == 0.0] = 1.0
    rows = raw / totals
    # guard against an all-zero gamma draw on a feasible row
    empty = rows.sum(axis=1) == 0.0
    if empty.any():
        rows[empty] = _uniform_rows(feas)[empty]
    return rows


def _stage_side_lp(coef, own_feas, own_supports, opp_feas, opp_supports):
    """Feasibility LP for one side's stage best-response conditions.

    ``coef[own_type, own_action, opp_type, opp_action]`` already carries
    the belief weight over the opponent's types.  Unknowns: opponent
    strategy rows (restricted to the enumerated supports) plus one free
    value per own type.  Returns opponent rows or None.
    """
    n_own, m_own, n_opp, m_opp = coef.shape
    var = {}
    for t in range(n_opp):
        for a in opp_supports[t]:
            var[(t, a)] = len(var)
    n_y = len(var)
    n_vars = n_y + n_own
    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for t in range(n_opp):
        row = np.zeros(n_vars)
        for a in opp_supports[t]:
            row[var[(t, a)]] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)
    for t in range(n_own):
        for a in range(m_own):
            if not own_feas[t, a]:
                continue
            row = np.zeros(n_vars)
            for (tt, aa), i in var.items():
                row[i] = coef[t, a, tt, aa]
            row[n_y + t] = -1.0
            if a in own_supports[t]:
                a_eq.append(row)
                b_eq.append(0.0)
            else:
                a_ub.append(row)
                b_ub.append(0.0)
    lower = np.concatenate([np.zeros(n_y), np.full(n_own, -np.inf)])
    sol = solve_lp(LinearProgram.build(np.zeros(n_vars), a_ub or None,
                                       b_ub or None, a_eq, b_eq, lower=lower))
    if sol.status != "optimal":
        return None
    rows = np.zeros((n_opp, m_opp))
    for (t, a), i in var.items():
        rows[t, a] = max(0.0, sol.z[i])
    totals = rows.sum(axis=1, keepdims=True)
    if np.any(totals <= 0.0):
        return None
    return rows / totals


def _stage_support_enumeration(t1, t2, feas1, feas2, b1, b2,
                               combo_budget: int = 50_000):
    """Complete search over per-type supports; the certified fallback
    when alternating ascent misses the program's zero optimum."""
    m1, m2, n1, n2 = t1.shape
    coef1 = np.einsum("abst,t->satb", t1, b2)    # defender side, belief over user
    coef2 = np.einsum("abst,s->tbsa", t2, b1)
    subs1 = [_sized_subsets(tuple(np.flatnonzero(feas1[t]))) for t in range(n1)]
    subs2 = [_sized_subsets(tuple(np.flatnonzero(feas2[t]))) for t in range(n2)]
    n_combos = int(np.prod([len(s) for s in subs1 + subs2]))
    if n_combos > combo_budget:
        return None
    for sup1 in itertools.product(*subs1):
        for sup2 in itertools.product(*subs2):
            sigma2 = _stage_side_lp(coef1, feas1, sup1, feas2, sup2)
            if sigma2 is None:
                continue
            sigma1 = _stage_side_lp(coef2, feas2, sup2, feas1, sup1)
            if sigma1 is None:
                continue
            cand = _evaluate_candidate(t1, t2, feas1, feas2, b1, b2,
                                       sigma1, sigma2, -2, 0)
            if cand.converged:
                return cand
    return None


def _sized_subsets(items: tuple[int, ...]):
    out = []
    for r in range(1, len(items) + 1):
        out.extend(itertools.combinations(items, r))
    return sorted(out, key=lambda s: (len(s), s))


def solve_stage_tensors(t1, t2, feas1, feas2, b1, b2, restarts: int = 16,
                        seed: int = 0, warm=None, threads: int = 1
                        ) -> BilinearStageSolution:
    """Multi-start solve of one stage program.

    Starts are evaluated in index order (warm start first when given,
    then uniform, then seeded random user strategies); the first start
    whose certified gap passes is returned, so results do not depend on
    the thread count.
    """
    b1 = np.asarray(getattr(b1, "weights", b1), dtype=float)
    b2 = np.asarray(getattr(b2, "weights", b2), dtype=float)

    candidates: list = []
    if warm is not None:
        w_sigma1, w_sigma2 = warm
        direct = _evaluate_candidate(t1, t2, feas1, feas2, b1, b2,
                                     np.asarray(w_sigma1), np.asarray(w_sigma2), -1, 0)
        if direct.converged:
            return direct
        candidates.append(("warm", np.asarray(w_sigma2)))
    candidates.append(("uniform", _uniform_rows(feas2)))
    n2, m2 = feas2.shape
    pure_combos = list(itertools.islice(
        itertools.product(*(np.flatnonzero(feas2[t]) for t in range(n2))), 32))
    for combo in pure_combos:
        rows = np.zeros((n2, m2))
        rows[np.arange(n2), list(combo)] = 1.0
        candidates.append((f"pure{combo}", rows))
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        candidates.append((f"random{r}", _random_rows(feas2, rng)))

    def run(idx_start):
        idx, (_, sigma2_start) = idx_start
        return _alternate_from(t1, t2, feas1, feas2, b1, b2, sigma2_start, idx)

    results: list[BilinearStageSolution] = []
    order = list(enumerate(candidates))
    if threads <= 1:
        for item in order:
            sol = run(item)
            results.append(sol)
            if sol.converged:
                return sol
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for base in range(0, len(order), threads):
                batch = list(pool.map(run, order[base:base + threads]))
                results.extend(batch)
                for sol in batch:
                    if sol.converged:
                        return sol
    fallback = _stage_support_enumeration(t1, t2, feas1, feas2, b1, b2)
    if fallback is not None:
        return fallback
    return min(results, key=lambda r: (max(r.gaps1.max(initial=0.0),
                                           r.gaps2.max(initial=0.0)), r.start_index))


def stage_bilinear_solve(stage: StageGame, x, b_about_1, b_about_2,
                         v1_next=None, v2_next=None, restarts: int = 16,
                         seed: int = 0, warm=None, threads: int = 1
                         ) -> BilinearStageSolution:
    """Solve the per-stage program at one state given beliefs and
    continuation values for the next stage."""
    xi = stage.state_index(x)
    t1, t2, feas1, feas2 = _stage_tensors(stage, xi, v1_next, v2_next)
    try:
        return solve_stage_tensors(t1, t2, feas1, feas2, b_about_1, b_about_2,
                                   restarts=restarts, seed=seed, warm=warm,
                                   threads=threads)
    except SolverError as err:
        raise SolverError(f"stage {stage.index}, state {stage.states[xi]!r}: {err}") from err


# ---------------------------------------------------------------------------
# History tree, forward pass, backward pass.
# ---------------------------------------------------------------------------

def build_tree(game: MultiStageGame) -> dict[NodeKey, tuple[int, int]]:
    """All action histories up to the final stage, mapped to (stage, state)."""
    x0 = game.stages[0].state_index(game.initial_state)
    nodes: dict[NodeKey, tuple[int, int]] = {(): (0, x0)}
    frontier: list[NodeKey] = [()]
    for k in range(game.horizon):
        st = game.stages[k]
        nxt = []
        for path in frontier:
            x = nodes[path][1]
            for a1 in range(st.m1):
                for a2 in range(st.m2):
                    child = path + ((a1, a2),)
                    nodes[child] = (k + 1, int(st.transition_table[x, a1, a2]))
                    nxt.append(child)
        frontier = nxt
    return nodes


def prior_beliefs(game: MultiStageGame) -> BeliefSystem:
    """The uninformative start: priors carried forward at every node."""
    nodes = build_tree(game)
    n1, n2 = game.n1, game.n2
    p_about_2 = np.asarray(game.prior_about_2.weights)
    p_about_1 = np.asarray(game.prior_about_1.weights)
    bel1 = {path: np.tile(p_about_2, (n1, 1)) for path in nodes}
    bel2 = {path: np.tile(p_about_1, (n2, 1)) for path in nodes}
    off1 = {path: False for path in nodes}
    off2 = {path: False for path in nodes}
    agg1, agg2, agg_off = [], [], []
    for k, st in enumerate(game.stages):
        agg1.append(np.tile(p_about_1, (st.n_states, 1)))
        agg2.append(np.tile(p_about_2, (st.n_states, 1)))
        agg_off.append(np.zeros(st.n_states, dtype=bool))
    return BeliefSystem(bel1, bel2, off1, off2,
                        tuple(agg1), tuple(agg2), tuple(agg_off), 0.0)


def forward_pass(game: MultiStageGame, profile: StrategyProfile) -> BeliefSystem:
    """Bayes-update beliefs along every history and aggregate per state."""
    nodes = build_tree(game)
    n1, n2 = game.n1, game.n2
    p1w = np.asarray(game.prior_about_1.weights)   # world prior over defender types
    p2w = np.asarray(game.prior_about_2.weights)

    bel1 = {(): np.tile(p2w, (n1, 1))}
    bel2 = {(): np.tile(p1w, (n2, 1))}
    off1 = {(): False}
    off2 = {(): False}
    reach = {(): np.ones((n1, n2))}

    by_stage: list[list[NodeKey]] = [[] for _ in game.stages]
    for path, (k, _) in nodes.items():
        by_stage[k].append(path)
    for k in range(game.horizon):
        st = game.stages[k]
        s1 = profile.sigma1[k]
        s2 = profile.sigma2[k]
        for path in by_stage[k]:
            x = nodes[path][1]
            for a1 in range(st.m1):
                like1 = s1[x, :, a1]
                for a2 in range(st.m2):
                    like2 = s2[x, :, a2]
                    child = path + ((a1, a2),)
                    upd1 = []
                    flag1 = False
                    for t in range(n1):
                        post, on = belief_update(bel1[path][t], s2[x], a2)
                        upd1.append(post.weights)
                        flag1 = flag1 or not on
                    upd2 = []
                    flag2 = False
                    for t in range(n2):
                        post, on = belief_update(bel2[path][t], s1[x], a1)
                        upd2.append(post.weights)
                        flag2 = flag2 or not on
                    bel1[child] = np.stack(upd1)
                    bel2[child] = np.stack(upd2)
                    off1[child] = off1[path] or flag1
                    off2[child] = off2[path] or flag2
                    reach[child] = reach[path] * np.outer(like1, like2)

    agg1, agg2, agg_off = [], [], []
    discrepancy = 0.0
    for k, st in enumerate(game.stages):
        a1k = np.zeros((st.n_states, n1))
        a2k = np.zeros((st.n_states, n2))
        offk = np.zeros(st.n_states, dtype=bool)
        for x in range(st.n_states):
            paths = [p for p in by_stage[k] if nodes[p][1] == x]
            mass1 = np.zeros(n1)
            mass2 = np.zeros(n2)
            for p in paths:
                joint = (p1w[:, None] * p2w[None, :]) * reach[p]
                mass1 += joint.sum(axis=1)
                mass2 += joint.sum(axis=0)
            if mass2.sum() > 1e-15:
                a2k[x] = mass2 / mass2.sum()
                a1k[x] = mass1 / mass1.sum()
            else:
                a2k[x] = p2w
                a1k[x] = p1w
                offk[x] = True
            for p in paths:
                joint = (p1w[:, None] * p2w[None, :]) * reach[p]
                if joint.sum() > 1e-15:
                    discrepancy = max(
                        discrepancy,
                        float(np.abs(bel1[p] - a2k[x][None, :]).max()),
                        float(np.abs(bel2[p] - a1k[x][None, :]).max()))
        agg1.append(a1k)
        agg2.append(a2k)
        agg_off.append(offk)
    return BeliefSystem(bel1, bel2, off1, off2,
                        tuple(agg1), tuple(agg2), tuple(agg_off), discrepancy)


def backward_pass(game: MultiStageGame, beliefs: BeliefSystem,
                  restarts: int = 16, seed: int = 0,
                  warm_profile: StrategyProfile | None = None,
                  threads: int = 1
                  ) -> tuple[StrategyProfile, ValueFunction, dict]:
    """Solve every (stage, state) program from the horizon down."""
    K = game.horizon
    n1, n2 = game.n1, game.n2
    sig1: list[np.ndarray | None] = [None] * (K + 1)
    sig2: list[np.ndarray | None] = [None] * (K + 1)
    v1: list[np.ndarray | None] = [None] * (K + 1)
    v2: list[np.ndarray | None] = [None] * (K + 1)
    stage_solutions: dict[tuple[int, int], BilinearStageSolution] = {}

    v1_next = np.zeros((len(game.stages[K].next_states), n1))
    v2_next = np.zeros((len(game.stages[K].next_states), n2))
    for k in range(K, -1, -1):
        st = game.stages[k]
        sig1[k] = np.zeros((st.n_states, n1, st.m1))
        sig2[k] = np.zeros((st.n_states, n2, st.m2))
        v1[k] = np.zeros((st.n_states, n1))
        v2[k] = np.zeros((st.n_states, n2))
        for x in range(st.n_states):
            t1, t2, feas1, feas2 = _stage_tensors(st, x, v1_next, v2_next)
            b1 = beliefs.agg_about_1[k][x]
            b2 = beliefs.agg_about_2[k][x]
            warm = None
            if warm_profile is not None:
                warm = (warm_profile.sigma1[k][x], warm_profile.sigma2[k][x])
            stage_seed = int(np.random.SeedSequence(
                entropy=seed, spawn_key=(k, x)).generate_state(1)[0])
            try:
                sol = solve_stage_tensors(t1, t2, feas1, feas2, b1, b2,
                                          restarts=restarts, seed=stage_seed,
                                          warm=warm, threads=threads)
            except SolverError as err:
                raise SolverError(
                    f"stage {k}, state {st.states[x]!r}: {err}") from err
            stage_solutions[(k, x)] = sol
            sig1[k][x] = sol.sigma1
            sig2[k][x] = sol.sigma2
            v1[k][x] = np.einsum("abst,sa,tb,t->s", t1, sol.sigma1, sol.sigma2, b2)
            v2[k][x] = np.einsum("abst,sa,tb,s->t", t2, sol.sigma1, sol.sigma2, b1)
        v1_next, v2_next = v1[k], v2[k]
    profile = StrategyProfile(tuple(sig1), tuple(sig2))
    return profile, ValueFunction(tuple(v1), tuple(v2)), stage_solutions


# ---------------------------------------------------------------------------
# Exact evaluation over the history tree.
# ---------------------------------------------------------------------------

def _tree_value(game: MultiStageGame, profile: StrategyProfile,
                beliefs: BeliefSystem, player: int, own_type: int,
                best_response: bool, from_stage: int = 0) -> float:
    """Expected utility (or its best-response analogue) from the root.

    The own-stage payoff at each node takes the joint expectation of
    the opponent's type and action under the node belief; deviations,
    when requested, may condition on the full history.
    """
    nodes = build_tree(game)
    by_stage: list[list[NodeKey]] = [[] for _ in game.stages]
    for path, (k, _) in nodes.items():
        by_stage[k].append(path)
    value: dict[NodeKey, float] = {}
    for k in range(game.horizon, -1, -1):
        st = game.stages[k]
        s1 = profile.sigma1[k]
        s2 = profile.sigma2[k]
        counted = k >= from_stage
        for path in by_stage[k]:
            x = nodes[path][1]
            if player == 1:
                bel = beliefs.belief_p1[path][own_type]
                own_feas = st.payoff1.feasible[x, own_type]
                own_sigma = s1[x, own_type]
                q = np.zeros(st.m1)
                for a1 in range(st.m1):
                    acc = 0.0
                    for a2 in range(st.m2):
                        cont = value[path + ((a1, a2),)] if k < game.horizon else 0.0
                        stage_pay = st.payoff1.values[x, a1, a2, own_type, :]
                        lik = bel * s2[x, :, a2]
                        if counted:
                            acc += float(lik @ stage_pay)
                        acc += float(lik.sum()) * cont
                    q[a1] = acc
            else:
                bel = beliefs.belief_p2[path][own_type]
                own_feas = st.payoff2.feasible[x, own_type]
                own_sigma = s2[x, own_type]
                q = np.zeros(st.m2)
                for a2 in range(st.m2):
                    acc = 0.0
                    for a1 in range(st.m1):
                        cont = value[path + ((a1, a2),)] if k < game.horizon else 0.0
                        stage_pay = st.payoff2.values[x, a1, a2, :, own_type]
                        lik = bel * s1[x, :, a1]
                        if counted:
                            acc += float(lik @ stage_pay)
                        acc += float(lik.sum()) * cont
                    q[a2] = acc
            if best_response and counted:
                value[path] = float(np.where(own_feas, q, -np.inf).max())
            else:
                value[path] = float(own_sigma @ q)
    return value[()]


def cumulative_utility(game: MultiStageGame, profile: StrategyProfile,
                       beliefs: BeliefSystem, type1, type2,
                       from_stage: int = 0) -> tuple[float, float]:
    """Exact expected sums of stage payoffs from ``from_stage`` on.

    Returns the pair (defender value at its given type, user value at
    its given type); each side's expectation runs over the opponent's
    type under the supplied beliefs and over both players' action
    draws, by full tree traversal.
    """
    t1 = game.type_index(1, type1)
    t2 = game.type_index(2, type2)
    u1 = _tree_value(game, profile, beliefs, 1, t1, False, from_stage)
    u2 = _tree_value(game, profile, beliefs, 2, t2, False, from_stage)
    return u1, u2


def verify_epsilon(game: MultiStageGame, profile: StrategyProfile,
                   beliefs: BeliefSystem) -> EpsilonReport:
    """Certify how far each (player, type) is from its best response.

    Best responses are computed over history-dependent deviations with
    the opponent's profile and the supplied beliefs held fixed.  Belief
    consistency is checked, not assumed: the forward pass is recomputed
    from the profile and compared on path.
    """
    recomputed = forward_pass(game, profile)
    violation = 0.0
    for path, arr in recomputed.belief_p1.items():
        if not recomputed.off_path_p1[path]:
            violation = max(violation, float(np.abs(arr - beliefs.belief_p1[path]).max()))
    for path, arr in recomputed.belief_p2.items():
        if not recomputed.off_path_p2[path]:
            violation = max(violation, float(np.abs(arr - beliefs.belief_p2[path]).max()))

    eps1 = np.zeros(game.n1)
    eps2 = np.zeros(game.n2)
    for t in range(game.n1):
        ach = _tree_value(game, profile, beliefs, 1, t, False)
        best = _tree_value(game, profile, beliefs, 1, t, True)
        eps1[t] = max(0.0, best - ach)
    for t in range(game.n2):
        ach = _tree_value(game, profile, beliefs, 2, t, False)
        best = _tree_value(game, profile, beliefs, 2, t, True)
        eps2[t] = max(0.0, best - ach)
    eps1[eps1 < 1e-12] = 0.0
    eps2[eps2 < 1e-12] = 0.0
    return EpsilonReport(eps1, eps2, violation, violation <= 1e-9)


def _profile_residual(a: StrategyProfile, b: StrategyProfile) -> float:
    res = 0.0
    for pa, pb in zip(a.sigma1 + a.sigma2, b.sigma1 + b.sigma2):
        res = max(res, float(np.abs(pa - pb).max()))
    return res


def _belief_residual(a: BeliefSystem, b: BeliefSystem) -> float:
    res = 0.0
    for path, arr in a.belief_p1.items():
        res = max(res, float(np.abs(arr - b.belief_p1[path]).max()))
    for path, arr in a.belief_p2.items():
        res = max(res, float(np.abs(arr - b.belief_p2[path]).max()))
    for k in range(len(a.agg_about_1)):
        res = max(res, float(np.abs(a.agg_about_1[k] - b.agg_about_1[k]).max()))
        res = max(res, float(np.abs(a.agg_about_2[k] - b.agg_about_2[k]).max()))
    return res


def solve_pbne(game: MultiStageGame, tol: float = 1e-6, max_iter: int = 100,
               restarts: int = 16, seed: int = 0, threads: int = 1):
    """Forward-backward iteration to a consistent profile/belief pair.

    Returns a :class:`PbneSolution` on convergence (sup-norm change of
    both strategies and beliefs at most ``tol`` in the same sweep) or a
    :class:`NonConvergenceReport` carrying the residual trace, which is
    evidence that no equilibrium of this form was found, not an error.
    """
    problems = validate_game(game)
    if problems:
        raise MalformedInputError("; ".join(problems))

    beliefs = prior_beliefs(game)
    profile: StrategyProfile | None = None
    trace: list[tuple[float, float]] = []
    values = None
    stage_solutions: dict = {}
    for it in range(1, max_iter + 1):
        new_profile, values, stage_solutions = backward_pass(
            game, beliefs, restarts=restarts, seed=seed,
            warm_profile=profile, threads=threads)
        new_beliefs = forward_pass(game, new_profile)
        res_p = np.inf if profile is None else _profile_residual(new_profile, profile)
        res_b = _belief_residual(new_beliefs, beliefs)
        trace.append((res_p, res_b))
        profile, beliefs = new_profile, new_beliefs
        if res_b <= tol and (it == 1 or res_p <= tol):
            eps = verify_epsilon(game, profile, beliefs)
            worst_stage = max((max(s.gaps1.max(initial=0.0), s.gaps2.max(initial=0.0))
                               for s in stage_solutions.values()), default=0.0)
            return PbneSolution(profile, beliefs, values, eps, it,
                                tuple(trace), worst_stage)
    return NonConvergenceReport(max_iter, tuple(trace), profile, beliefs,
                                trace[-1])
