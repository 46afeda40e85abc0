"""The two item sets of the Beta-reward experiments and the three experiment presets.

Both sets share the item means; Set 1 has two high-variance items so that the
unconstrained optimum turns risky under a tight budget, Set 2 gives every item
variance 0.01.
"""

import logging
from typing import List, Optional, Tuple

from agent import settings
from instance.model import Instance, RewardModel, SolutionFamily
from lab.simulate import RunConfig

logger = logging.getLogger(__name__)

NUM_ITEMS = 10
MAX_SIZE = 3

TABLE1_MEANS = (0.5, 0.45, 0.4, 0.35) + (0.3,) * 6
SET1_VARIANCES = (0.24, 0.24, 0.04, 0.01) + (0.01,) * 6
SET2_VARIANCES = (0.01,) * NUM_ITEMS

# Exp 1 budgets: 0.6 forces safeness checks, 0.751 makes every solution safe.
EXP1_BUDGETS = (0.6, 0.751)
EXP2_BUDGET = 0.4
EXP3_GRID = tuple(0.14 * 1.2**k for k in range(10))

DEFAULT_HORIZONS = {1: 200_000, 2: 100_000, 3: 200_000}

EXPERIMENT_IDS = (1, 2, 3)


def set_instance(set_id: int, sigma_bar_sq: float) -> Instance:
    """Set 1 or Set 2 under budget ``sigma_bar_sq`` with L=10, K=3 and Beta rewards."""
    if set_id == 1:
        variances = SET1_VARIANCES
    elif set_id == 2:
        variances = SET2_VARIANCES
    else:
        raise ValueError(f"unknown item set {set_id}, expected 1 or 2")
    return Instance(
        item_means=TABLE1_MEANS,
        item_variances=variances,
        reward_models=RewardModel.BETA,
        K=MAX_SIZE,
        family=SolutionFamily.all_subsets(MAX_SIZE),
        sigma_bar_sq=sigma_bar_sq,
        sigma_sq=settings.SIGMA_SQ,
        name=f"set{set_id}@{sigma_bar_sq:.4g}",
    )


def exp3_variance_gaps() -> Tuple[float, ...]:
    """Variance gap of the optimal safe solution at each Exp 3 budget (sigma_bar_sq - 0.03)."""
    return tuple(budget - 3 * SET2_VARIANCES[0] for budget in EXP3_GRID)


def experiment_preset(
    experiment_id: int,
    horizon: Optional[int] = None,
    replications: int = settings.REPLICATIONS,
    seed: int = 0,
    delta: float = settings.DELTA,
) -> List[RunConfig]:
    """Run configs of experiment 1, 2 or 3, labelled for the reports.

    Every config of one experiment shares the master seed, so the baseline and
    the constrained runs see the same replication seeds.
    """
    if experiment_id not in EXPERIMENT_IDS:
        raise ValueError(f"unknown experiment {experiment_id}, expected one of {EXPERIMENT_IDS}")
    T = horizon or DEFAULT_HORIZONS[experiment_id]

    def run(instance: Instance, algorithm: str, label: str) -> RunConfig:
        return RunConfig(
            instance=instance,
            algorithm=algorithm,
            horizon=T,
            delta=delta,
            master_seed=seed,
            replications=replications,
            label=label,
        )

    if experiment_id == 1:
        configs = [
            run(set_instance(1, budget), "pascomb", f"pascomb@{budget:g}")
            for budget in EXP1_BUDGETS
        ]
        configs.append(run(set_instance(1, EXP1_BUDGETS[0]), "combucb1", "combucb1"))
        return configs

    if experiment_id == 2:
        instance = set_instance(1, EXP2_BUDGET)
        return [
            run(instance, "pascomb", f"pascomb@{EXP2_BUDGET:g}"),
            run(instance, "combucb1", f"combucb1@{EXP2_BUDGET:g}"),
        ]

    configs = [
        run(set_instance(2, budget), "pascomb", f"pascomb@{budget:.4f}") for budget in EXP3_GRID
    ]
    # Every Set 2 solution is safe at the top of the grid, so the baseline is budget-free.
    configs.append(run(set_instance(2, EXP3_GRID[-1]), "combucb1", "combucb1"))
    return configs
