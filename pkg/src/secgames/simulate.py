"""Monte Carlo play-out of a multi-stage game under a strategy profile.

Per-trajectory generators are derived from (seed, trajectory index), so
a run is bit-reproducible and independent of batching.  Additive
zero-mean stage noise can be recorded next to the clean payoffs; it
never influences actions or transitions, mirroring the fact that the
solvers work with the noise-free expected payoffs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MalformedInputError, MultiStageGame, StrategyProfile, _readonly


@dataclass(frozen=True)
class NoiseSpec:
    """Additive zero-mean payoff noise: none, gaussian(scale) or uniform(+-scale)."""

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "uniform"):
            raise MalformedInputError(f"unknown noise kind {self.kind!r}")
        if self.kind != "none" and self.scale < 0:
            raise MalformedInputError("noise scale must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Parse CLI syntax 'none', 'gaussian:1.0' or 'uniform:0.5'."""
        if text == "none":
            return cls()
        try:
            kind, scale = text.split(":", 1)
            return cls(kind, float(scale))
        except ValueError:
            raise MalformedInputError(
                f"noise spec {text!r}; expected none, gaussian:<sd> or uniform:<half-width>"
            ) from None

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "gaussian":
            return float(rng.normal(0.0, self.scale))
        if self.kind == "uniform":
            return float(rng.uniform(-self.scale, self.scale))
        return 0.0


@dataclass(frozen=True)
class TrajectoryStep:
    stage: int
    state: str
    action1: str
    action2: str
    payoff1: float
    payoff2: float
    noisy1: float
    noisy2: float


@dataclass(frozen=True)
class Trajectory:
    type1: str
    type2: str
    steps: tuple[TrajectoryStep, ...]
    terminal_state: str

    @property
    def total1(self) -> float:
        return sum(s.payoff1 for s in self.steps)

    @property
    def total2(self) -> float:
        return sum(s.payoff2 for s in self.steps)


def _trajectory_rng(seed: int, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(index, stream)))


def sample_playout(game: MultiStageGame, profile: StrategyProfile,
                   rng_seed: int = 0, noise: NoiseSpec | str = "none",
                   trajectory_index: int = 0) -> Trajectory:
    """Draw types from the priors, then play the profile stage by stage.

    Noise uses its own random stream, so switching it on or off never
    changes the sampled types, actions or states.
    """
    noise = NoiseSpec.parse(noise) if isinstance(noise, str) else noise
    rng = _trajectory_rng(rng_seed, trajectory_index, 0)
    noise_rng = _trajectory_rng(rng_seed, trajectory_index, 1)
    p1 = np.asarray(game.prior_about_1.weights)
    p2 = np.asarray(game.prior_about_2.weights)
    t1 = int(rng.choice(game.n1, p=p1))
    t2 = int(rng.choice(game.n2, p=p2))

    x = game.stages[0].state_index(game.initial_state)
    steps = []
    for k, st in enumerate(game.stages):
        a1 = int(rng.choice(st.m1, p=profile.sigma1[k][x, t1]))
        a2 = int(rng.choice(st.m2, p=profile.sigma2[k][x, t2]))
        pay1 = float(st.payoff1.values[x, a1, a2, t1, t2])
        pay2 = float(st.payoff2.values[x, a1, a2, t1, t2])
        w1 = noise.draw(noise_rng)
        w2 = noise.draw(noise_rng)
        steps.append(TrajectoryStep(k, st.states[x], st.actions1[a1],
                                    st.actions2[a2], pay1, pay2,
                                    pay1 + w1, pay2 + w2))
        x = int(st.transition_table[x, a1, a2])
    terminal = game.stages[-1].next_states[x]
    return Trajectory(game.types1[t1], game.types2[t2], tuple(steps), terminal)


@dataclass(frozen=True)
class MonteCarloReport:
    """Per-(player, own type) sample statistics of cumulative payoffs."""

    n: int
    counts1: np.ndarray
    counts2: np.ndarray
    mean1: np.ndarray
    mean2: np.ndarray
    stderr1: np.ndarray
    stderr2: np.ndarray
    noisy_mean1: np.ndarray
    noisy_mean2: np.ndarray
    noisy_stderr1: np.ndarray
    noisy_stderr2: np.ndarray

    def __post_init__(self):
        for name in ("counts1", "counts2", "mean1", "mean2", "stderr1", "stderr2",
                     "noisy_mean1", "noisy_mean2", "noisy_stderr1", "noisy_stderr2"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))


def _cell_stats(samples: list[list[float]]) -> tuple[np.ndarray, np.ndarray]:
    means = np.zeros(len(samples))
    errs = np.zeros(len(samples))
    for i, cell in enumerate(samples):
        if not cell:
            continue
        arr = np.asarray(cell)
        means[i] = arr.mean()
        if arr.size > 1:
            errs[i] = arr.std(ddof=1) / np.sqrt(arr.size)
    return means, errs


def monte_carlo_value(game: MultiStageGame, profile: StrategyProfile, n: int,
                      rng_seed: int = 0, noise: NoiseSpec | str = "none"
                      ) -> MonteCarloReport:
    """Sample means of cumulative payoffs, conditioned on own type."""
    if n < 1:
        raise MalformedInputError("sample count must be at least 1")
    noise = NoiseSpec.parse(noise) if isinstance(noise, str) else noise
    clean1 = [[] for _ in range(game.n1)]
    clean2 = [[] for _ in range(game.n2)]
    noisy1 = [[] for _ in range(game.n1)]
    noisy2 = [[] for _ in range(game.n2)]
    for i in range(n):
        traj = sample_playout(game, profile, rng_seed, noise, trajectory_index=i)
        t1 = game.type_index(1, traj.type1)
        t2 = game.type_index(2, traj.type2)
        clean1[t1].append(traj.total1)
        clean2[t2].append(traj.total2)
        noisy1[t1].append(sum(s.noisy1 for s in traj.steps))
        noisy2[t2].append(sum(s.noisy2 for s in traj.steps))
    m1, e1 = _cell_stats(clean1)
    m2, e2 = _cell_stats(clean2)
    nm1, ne1 = _cell_stats(noisy1)
    nm2, ne2 = _cell_stats(noisy2)
    return MonteCarloReport(
        n,
        np.array([len(c) for c in clean1]), np.array([len(c) for c in clean2]),
        m1, m2, e1, e2, nm1, nm2, ne1, ne2)
