"""Policy-gradient estimators, temporal-difference critics and toy environments."""

from .critic import (ActorCritic, ValueNet, actor_critic_train, advantage, mean_reward_baseline_fit,
                     td_evaluate, td_update, value_regression_loss)
from .env import Episode, ToyEnv, discounted_return, discounted_returns, generate_episode
from .policy import (SoftmaxPolicy, baseline_grad, estimator_samples, exact_policy_gradient,
                     grad_variance, make_noisy_reward, one_hot, optimal_baseline, reinforce_grad)

__all__ = [
    "ActorCritic", "ValueNet", "actor_critic_train", "advantage", "mean_reward_baseline_fit",
    "td_evaluate", "td_update", "value_regression_loss", "Episode", "ToyEnv", "discounted_return",
    "discounted_returns", "generate_episode", "SoftmaxPolicy", "baseline_grad",
    "estimator_samples", "exact_policy_gradient", "grad_variance", "make_noisy_reward", "one_hot",
    "optimal_baseline", "reinforce_grad",
]
