"""Monte Carlo play-out: determinism, noise isolation, convergence."""

import pytest

from secgames.core import MalformedInputError, StrategyProfile
from secgames.multistage import cumulative_utility, forward_pass
from secgames.simulate import (NoiseSpec, monte_carlo_value, sample_playout)
from secgames.scenarios import build_apt_game, build_static_bayesian
from secgames.static import to_multistage
from tests.test_multistage import chain_game


class TestNoiseSpec:
    def test_parse(self):
        assert NoiseSpec.parse("none") == NoiseSpec()
        assert NoiseSpec.parse("gaussian:1.5") == NoiseSpec("gaussian", 1.5)
        assert NoiseSpec.parse("uniform:0.25") == NoiseSpec("uniform", 0.25)

    def test_parse_errors(self):
        with pytest.raises(MalformedInputError):
            NoiseSpec.parse("gaussian")
        with pytest.raises(MalformedInputError):
            NoiseSpec.parse("cauchy:1.0")


class TestSamplePlayout:
    def test_forced_chain_is_deterministic(self):
        g = chain_game([(1.0, -1.0), (2.0, -2.0)])
        prof = StrategyProfile.uniform(g)
        traj = sample_playout(g, prof, rng_seed=0)
        assert [s.state for s in traj.steps] == ["s0", "s1"]
        assert traj.total1 == 3.0 and traj.total2 == -3.0
        assert traj.terminal_state == "s2"

    def test_zero_noise_means_equal_payoffs(self):
        g = build_apt_game()
        prof = StrategyProfile.uniform(g)
        traj = sample_playout(g, prof, rng_seed=5, noise="none")
        for s in traj.steps:
            assert s.noisy1 == s.payoff1 and s.noisy2 == s.payoff2

    def test_fixed_seed_reproducible(self):
        g = build_apt_game()
        prof = StrategyProfile.uniform(g)
        t1 = sample_playout(g, prof, rng_seed=42, noise="gaussian:1.0")
        t2 = sample_playout(g, prof, rng_seed=42, noise="gaussian:1.0")
        assert t1 == t2

    def test_noise_never_changes_the_path(self):
        g = build_apt_game()
        prof = StrategyProfile.uniform(g)
        clean = sample_playout(g, prof, rng_seed=9, noise="none")
        noisy = sample_playout(g, prof, rng_seed=9, noise="gaussian:3.0")
        assert [(s.state, s.action1, s.action2) for s in clean.steps] == \
               [(s.state, s.action1, s.action2) for s in noisy.steps]
        assert (clean.type1, clean.type2) == (noisy.type1, noisy.type2)

    def test_states_chain_through_transitions(self):
        g = build_apt_game()
        prof = StrategyProfile.uniform(g)
        for i in range(25):
            traj = sample_playout(g, prof, rng_seed=100, trajectory_index=i)
            for k, step in enumerate(traj.steps):
                st = g.stages[k]
                x = st.state_index(step.state)
                a1 = st.actions1.index(step.action1)
                a2 = st.actions2.index(step.action2)
                nxt = st.next_states[int(st.transition_table[x, a1, a2])]
                if k + 1 < len(traj.steps):
                    assert traj.steps[k + 1].state == nxt
                else:
                    assert traj.terminal_state == nxt


class TestMonteCarloValue:
    def test_zero_game(self):
        g = chain_game([(0.0, 0.0)])
        prof = StrategyProfile.uniform(g)
        rep = monte_carlo_value(g, prof, 50, rng_seed=0)
        assert rep.mean1[0] == 0.0 and rep.stderr1[0] == 0.0

    def test_forced_chain_mean_exact(self):
        g = chain_game([(5.0, 1.0), (5.0, 1.0), (5.0, 1.0)])
        prof = StrategyProfile.uniform(g)
        rep = monte_carlo_value(g, prof, 20, rng_seed=0)
        assert rep.mean1[0] == pytest.approx(15.0, abs=1e-12)
        assert rep.stderr1[0] == 0.0

    def test_sample_count_validated(self):
        g = chain_game([(0.0, 0.0)])
        with pytest.raises(MalformedInputError):
            monte_carlo_value(g, StrategyProfile.uniform(g), 0)

    def test_noisy_mean_matches_clean_within_three_stderr(self):
        g = chain_game([(2.0, -1.0), (3.0, 1.0)])
        prof = StrategyProfile.uniform(g)
        rep = monte_carlo_value(g, prof, 100_000, rng_seed=1, noise="gaussian:1.0")
        for mean, noisy, err in ((rep.mean1[0], rep.noisy_mean1[0], rep.noisy_stderr1[0]),
                                 (rep.mean2[0], rep.noisy_mean2[0], rep.noisy_stderr2[0])):
            assert abs(noisy - mean) <= 3 * err

    def test_converges_to_tree_value(self):
        g = to_multistage(build_static_bayesian(2.0, 1.0, 3.0, 0.4))
        prof = StrategyProfile.uniform(g)
        bel = forward_pass(g, prof)
        rep = monte_carlo_value(g, prof, 100_000, rng_seed=7)
        for t2 in range(g.n2):
            exact = cumulative_utility(g, prof, bel, 0, t2)[1]
            err = max(rep.stderr2[t2], 1e-9)
            assert abs(rep.mean2[t2] - exact) <= 3 * err

    def test_counts_partition_n(self):
        g = build_apt_game()
        prof = StrategyProfile.uniform(g)
        rep = monte_carlo_value(g, prof, 500, rng_seed=2)
        assert rep.counts1.sum() == 500
        assert rep.counts2.sum() == 500
