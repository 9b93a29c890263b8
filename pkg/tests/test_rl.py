import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebml.autodiff import finite_diff_check
from ebml.optim import Optimizer
from ebml.rl import (ActorCritic, Episode, SoftmaxPolicy, ToyEnv, ValueNet, actor_critic_train,
                     advantage, baseline_grad, discounted_return, discounted_returns,
                     estimator_samples, exact_policy_gradient, generate_episode, grad_variance,
                     make_noisy_reward, mean_reward_baseline_fit, optimal_baseline, reinforce_grad,
                     td_evaluate, td_update, value_regression_loss)


def random_policy(C, F, seed):
    pol = SoftmaxPolicy(C, F)
    pol.set_flat(np.random.default_rng(seed).normal(size=pol.n_params))
    return pol


def within_3se(G, ref):
    se = G.std(axis=0, ddof=1) / np.sqrt(G.shape[0])
    return np.all(np.abs(G.mean(axis=0) - ref) <= 3 * se + 1e-12)


class TestPolicy:
    def test_closed_form_matches_tape(self):
        pol = random_policy(3, 4, 0)
        for y in range(3):
            np.testing.assert_allclose(pol.grad_log_prob(2, y), pol.grad_log_prob_tape(2, y), atol=1e-12)

    def test_probability_rows(self):
        pol = random_policy(4, 3, 1)
        np.testing.assert_allclose(pol.table(3).sum(axis=1), 1.0, atol=1e-12)

    def test_feature_policy(self):
        pol = SoftmaxPolicy(2, 3, tabular=False)
        pol.set_flat(np.arange(8, dtype=float))
        x = np.array([0.5, -1.0, 2.0])
        np.testing.assert_allclose(pol.logits(x), pol.U @ x + pol.c)


class TestReinforce:
    def test_single_action_zero(self):
        pol = random_policy(1, 2, 0)
        g = reinforce_grad(0, pol, [3.0], np.random.default_rng(0))
        np.testing.assert_array_equal(g, 0.0)

    def test_unbiased(self):
        pol = random_policy(3, 2, 2)
        R = np.array([0.5, 2.0, -1.0])
        G = estimator_samples(0, pol, R, None, 100_000, np.random.default_rng(0))
        assert within_3se(G, exact_policy_gradient(0, pol, R))

    def test_constant_reward_with_matching_baseline(self):
        pol = random_policy(3, 2, 3)
        rng = np.random.default_rng(1)
        for _ in range(20):
            np.testing.assert_array_equal(baseline_grad(0, pol, [2.0] * 3, 2.0, rng), 0.0)

    def test_noisy_reward_expectation(self):
        pol = random_policy(2, 1, 4)
        R = np.array([1.0, -1.0])
        G = estimator_samples(0, pol, make_noisy_reward(R, 0.5), None, 100_000, np.random.default_rng(2))
        assert within_3se(G, exact_policy_gradient(0, pol, R))


class TestBaselines:
    def test_score_has_zero_mean(self):
        pol = random_policy(3, 2, 5)
        G = estimator_samples(1, pol, np.zeros(3), -1.0, 100_000, np.random.default_rng(0))
        assert within_3se(G, np.zeros(pol.n_params))

    def test_constant_baseline_unbiased(self):
        pol = random_policy(3, 2, 6)
        R = np.array([1.0, 0.0, 3.0])
        G = estimator_samples(0, pol, R, 7.5, 100_000, np.random.default_rng(1))
        assert within_3se(G, exact_policy_gradient(0, pol, R))

    def test_mean_reward_baseline_reduces_variance(self):
        pol = random_policy(2, 1, 7)
        R = np.array([1.0, 0.0])
        b = float(pol.probs(0) @ R)
        v0 = grad_variance(0, pol, R, None, 100_000, np.random.default_rng(2))
        v1 = grad_variance(0, pol, R, b, 100_000, np.random.default_rng(2))
        assert v1 < v0

    def test_deterministic_policy_zero_variance(self):
        pol = SoftmaxPolicy(2, 1)
        pol.set_flat(np.array([800.0, 0.0, 0.0, 0.0]))
        assert grad_variance(0, pol, [1.0, 0.0], None, 100, np.random.default_rng(0)) == 0.0

    def test_reward_scaling_quadruples_variance(self):
        pol = random_policy(3, 1, 8)
        R = np.array([1.0, 2.0, -0.5])
        v1 = grad_variance(0, pol, R, None, 100_000, np.random.default_rng(3))
        v2 = grad_variance(0, pol, 2 * R, None, 100_000, np.random.default_rng(3))
        # same draws, so the ratio is exact
        assert v2 == pytest.approx(4 * v1, rel=1e-10)

    def test_needs_two_draws(self):
        with pytest.raises(ValueError):
            grad_variance(0, random_policy(2, 1, 0), [1.0, 0.0], None, 1, np.random.default_rng(0))

    def test_optimal_baseline_minimizes_exact_variance(self):
        pol = random_policy(3, 1, 9)
        R = np.array([1.0, 4.0, -2.0])
        p = pol.probs(0)
        S = pol.grad_log_prob_batch(0, np.arange(3))

        def var(b):
            G = (R - b)[:, None] * S
            return p @ np.sum(G ** 2, axis=1) - np.sum((p @ G) ** 2)

        bstar = optimal_baseline(0, pol, R)
        for b in bstar + np.linspace(-1, 1, 9):
            assert var(bstar) <= var(b) + 1e-12


class TestValueHead:
    def test_converges_to_mean(self):
        net = ValueNet(1)
        opt = Optimizer("sgd", alpha=0.5)
        hist = [(0, r) for r in (0.0, 1.0, 1.0, 0.0)]
        for _ in range(200):
            mean_reward_baseline_fit(hist, net, opt)
        assert net(0) == pytest.approx(0.5, abs=1e-8)

    def test_constant_rewards(self):
        net = ValueNet(3)
        opt = Optimizer("sgd", alpha=0.5)
        for _ in range(200):
            mean_reward_baseline_fit([(1, 2.5)] * 3, net, opt)
        assert net(1) == pytest.approx(2.5, abs=1e-8)

    def test_gradient_check(self):
        net = ValueNet(3, tabular=False)
        rng = np.random.default_rng(0)
        net.store.set_value("value.U", rng.normal(size=(1, 3)))
        X, R = rng.normal(size=(6, 3)), rng.normal(size=6)
        assert finite_diff_check(lambda p: value_regression_loss(net, p, X, R), net.store) < 1e-7

    def test_empty_history(self):
        with pytest.raises(ValueError):
            mean_reward_baseline_fit([], ValueNet(1), Optimizer())


class TestAdvantage:
    def _ac(self, q):
        ac = ActorCritic(1, len(q))
        ac.q.store.set_value("q.c", np.asarray(q, dtype=float))
        ac.policy.set_flat(np.array([0.3, -0.2, 0.1, 0.0, 0.0, 0.0][: 2 * len(q)]))
        return ac

    def test_centered(self):
        ac = self._ac([1.0, -2.0, 0.5])
        A = np.array([advantage(0, y, ac) for y in range(3)])
        assert ac.policy.probs(0) @ A == pytest.approx(0.0, abs=1e-15)

    def test_constant_q(self):
        ac = self._ac([1.5, 1.5])
        assert advantage(0, 0, ac) == pytest.approx(0.0, abs=1e-15)
        assert advantage(0, 1, ac) == pytest.approx(0.0, abs=1e-15)

    def test_learned_value_baseline(self):
        ac = ActorCritic(2, 2, baseline="value")
        ac.q.store.set_value("q.U", np.array([[1.0, 0.0], [3.0, 0.0]]))
        ac.value.store.set_value("value.c", np.array([0.5]))
        assert advantage(0, 0, ac) == pytest.approx(0.5)
        assert advantage(0, 1, ac) == pytest.approx(2.5)

    def test_invalid_action(self):
        with pytest.raises(ValueError):
            advantage(0, 5, self._ac([0.0, 0.0]))


class TestReturns:
    def test_zero_discount(self):
        assert discounted_return([1.0, 2.0, 3.0], 0.0, 1) == 2.0

    def test_geometric(self):
        T = 6
        for t in range(T):
            assert discounted_return(np.ones(T), 0.5, t) == pytest.approx(2 * (1 - 0.5 ** (T - t)))

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.floats(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_recursion(self, rewards, gamma):
        Q = discounted_returns(rewards, gamma)
        for t in range(len(rewards) - 1):
            assert Q[t] == pytest.approx(rewards[t] + gamma * Q[t + 1], abs=1e-9)
        np.testing.assert_allclose(Q, [discounted_return(rewards, gamma, t) for t in range(len(rewards))],
                                   atol=1e-9)

    def test_invalid(self):
        with pytest.raises(ValueError):
            discounted_return([1.0], 1.5)
        with pytest.raises(IndexError):
            discounted_return([1.0], 0.5, 3)

    def test_episode_recursion(self):
        env = ToyEnv.chain(4, 0.7, 1.0, 0.9)
        rng = np.random.default_rng(0)
        pol = SoftmaxPolicy(2, 4)
        for _ in range(20):
            ep = generate_episode(env, pol, rng)
            Q = ep.returns(env.gamma)
            np.testing.assert_allclose(Q[:-1], np.asarray(ep.rewards[:-1]) + env.gamma * Q[1:], atol=1e-15)

    def test_episode_lengths(self):
        with pytest.raises(ValueError):
            Episode([0, 1], [0, 1], [0.0, 0.0])


class TestEnv:
    def test_rows_stochastic(self):
        with pytest.raises(ValueError):
            ToyEnv(np.full((1, 2, 2), 0.6), np.zeros((2, 1)))

    def test_bandit_is_one_step(self):
        env = ToyEnv.bandit([1.0, 0.0])
        xn, s, done = env.step(0, 0, np.random.default_rng(0))
        assert done and s == 1.0

    def test_q_policy_matches_monte_carlo(self):
        env = ToyEnv.chain(3, 0.8, 1.0, 0.9)
        pi = np.full((3, 2), 0.5)
        V = env.v_policy(pi)[0]
        rng = np.random.default_rng(1)
        pol = lambda x, r: int(r.random() < 0.5)  # noqa: E731
        R = [generate_episode(env, pol, rng, max_steps=400).returns(env.gamma)[0] for _ in range(4000)]
        assert abs(np.mean(R) - V) < 3 * np.std(R) / np.sqrt(len(R))


class TestTd:
    def test_zero_discount_target(self):
        ac = ActorCritic(2, 2)
        ac.q.store.set_value("q.U", np.full((2, 2), 5.0))
        # U and c both carry the one-hot gradient, so α=0.5 lands exactly on the target
        err = td_update((0, 1, 2.0, 1, 0), ac, Optimizer("sgd", 0.5), 0.0)
        assert err == pytest.approx(5.0 - 2.0)
        assert ac.q_values(0)[1] == pytest.approx(2.0)

    def test_frozen_target(self):
        ac = ActorCritic(2, 1, refresh_every=3)
        opt = Optimizer("sgd", 1.0)
        ac.q.store.set_value("q.c", np.array([1.0]))
        for _ in range(2):
            td_update((0, 0, 0.0, 1, 0), ac, opt, 0.5)
        assert ac.q_values(1, frozen=True)[0] == 0.0
        td_update((0, 0, 0.0, 1, 0), ac, opt, 0.5)
        assert ac.q_values(1, frozen=True)[0] == pytest.approx(ac.q_values(1)[0])
        assert ac.n_updates == 3

    def test_invalid_discount(self):
        with pytest.raises(ValueError):
            td_update((0, 0, 0.0, 0, 0), ActorCritic(1, 1), Optimizer(), 1.0)

    def test_exact_fixed_point(self):
        env = ToyEnv.chain(3, 0.8, 1.0, 0.9)
        pi = np.full((3, 2), 0.5)
        Q = td_evaluate(env, ActorCritic(3, 2), 30_000, np.random.default_rng(2), policy_table=pi)
        assert np.abs(Q - env.q_policy(pi)).max() < 0.05

    def test_zero_reward(self):
        env = ToyEnv.chain(3, 0.8, 0.0, 0.9)
        ac = ActorCritic(3, 2)
        ac.q.store.set_value("q.c", np.array([0.3, -0.3]))
        Q = td_evaluate(env, ac, 20_000, np.random.default_rng(3), policy_table=np.full((3, 2), 0.5))
        assert np.abs(Q).max() < 0.05


class TestActorCritic:
    def test_bandit(self):
        probs = []
        for seed in range(10):
            env = ToyEnv.bandit([1.0, 0.0])
            ac = ActorCritic(env.n_states, env.n_actions)
            actor_critic_train(env, ac, 2000, np.random.default_rng(seed))
            probs.append(ac.policy.probs(0)[0])
        assert np.median(probs) > 0.95

    @pytest.mark.parametrize("seed", range(3))
    def test_chain_reaches_near_optimal_value(self, seed):
        env = ToyEnv.chain(5, 0.9, 1.0, 0.9)
        ac = ActorCritic(5, 2)
        actor_critic_train(env, ac, 3000, np.random.default_rng(seed))
        V, _ = env.value_iteration()
        assert env.v_policy(ac.policy.table(5))[0] >= 0.9 * V[0]

    def test_zero_discount_is_bandit_learning(self):
        env = ToyEnv.chain(3, 1.0, 1.0, 0.0)
        ac = ActorCritic(3, 2)
        actor_critic_train(env, ac, 3000, np.random.default_rng(0))
        # with γ=0 only the immediate reward at the state next to the goal matters
        assert ac.policy.probs(1)[1] > 0.9
        np.testing.assert_allclose(ac.q_values(0), 0.0, atol=1e-12)

    def test_value_baseline_runs(self):
        env = ToyEnv.bandit([0.2, 1.0])
        ac = ActorCritic(env.n_states, env.n_actions, baseline="value")
        log = actor_critic_train(env, ac, 2000, np.random.default_rng(1))
        assert len(log["reward"]) == 2000
        assert ac.policy.probs(0)[1] > 0.9
