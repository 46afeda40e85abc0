"""Semi-bandit reward environment.

Rewards are drawn only for the items of the pulled solution. A second,
independently seeded stream draws the optimal safe solution's rewards for the
realized-regret ledger, so the learner's observations never depend on it.
"""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from instance.model import (
    Instance,
    InstanceError,
    RewardModel,
    SafetyPartition,
    beta_params_from_moments,
    classify,
)

logger = logging.getLogger(__name__)


class SemiBanditEnvironment:
    """Per-item Beta, Bernoulli or point-mass rewards for one run.

    Usage:
        env = SemiBanditEnvironment.for_run(instance, master_seed=7, run_index=0)
        rewards = env.pull((0, 2, 3))
        reference = env.reference_reward()
    """

    def __init__(
        self,
        instance: Instance,
        seed: Union[np.random.SeedSequence, int, None] = None,
        partition: Optional[SafetyPartition] = None,
    ):
        unsampled = [i + 1 for i, m in enumerate(instance.reward_models) if m == RewardModel.NONE]
        if unsampled:
            raise InstanceError(f"items {unsampled} have no reward model and cannot be sampled")

        sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        pull_sequence, reference_sequence = sequence.spawn(2)
        self.rng = np.random.default_rng(pull_sequence)
        self.reference_rng = np.random.default_rng(reference_sequence)

        self.instance = instance
        self.partition = partition or classify(instance)
        self._optimal = np.array(self.partition.optimal_safe, dtype=int)
        self._means = np.asarray(instance.item_means, dtype=float)
        models = np.array([m.value for m in instance.reward_models])
        self._beta = models == RewardModel.BETA.value
        self._bernoulli = models == RewardModel.BERNOULLI.value
        self._alpha = np.ones(instance.L)
        self._beta_b = np.ones(instance.L)
        for i in np.flatnonzero(self._beta):
            self._alpha[i], self._beta_b[i] = beta_params_from_moments(
                instance.item_means[i], instance.item_variances[i]
            )

    @classmethod
    def for_run(
        cls,
        instance: Instance,
        master_seed: int,
        run_index: int,
        partition: Optional[SafetyPartition] = None,
    ) -> "SemiBanditEnvironment":
        return cls(instance, np.random.SeedSequence([master_seed, run_index]), partition)

    def _draw(self, rng: np.random.Generator, items: np.ndarray) -> np.ndarray:
        rewards = self._means[items].copy()
        beta = self._beta[items]
        if beta.any():
            chosen = items[beta]
            rewards[beta] = rng.beta(self._alpha[chosen], self._beta_b[chosen])
        bernoulli = self._bernoulli[items]
        if bernoulli.any():
            chosen = items[bernoulli]
            rewards[bernoulli] = (rng.random(chosen.size) < self._means[chosen]).astype(float)
        return rewards

    def pull(self, items: Sequence[int]) -> np.ndarray:
        return self._draw(self.rng, np.asarray(items, dtype=int))

    def reference_reward(self) -> float:
        return float(self._draw(self.reference_rng, self._optimal).sum())
