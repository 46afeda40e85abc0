"""Seeded single runs and the Monte-Carlo replication pool.

Run ``k`` of a config always draws from ``SeedSequence([master_seed, k])``,
so a replication is reproducible on its own and the aggregate does not depend
on which worker ran it or in which order the runs finished.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from agent import ALGORITHMS, settings
from agent.confidence import LilConfig
from agent.environment import SemiBanditEnvironment
from agent.trace import Trace
from instance.model import Instance, classify

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """One algorithm on one instance, replicated ``replications`` times."""

    instance: Instance
    algorithm: str = "pascomb"
    horizon: int = 100_000
    delta: float = settings.DELTA
    epsilon: float = settings.EPSILON
    omega_mu: Optional[float] = None
    omega_v: Optional[float] = None
    omega_v_prime: Optional[float] = None
    master_seed: int = 0
    replications: int = 1
    label: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}, expected one of {sorted(ALGORITHMS)}"
            )
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        self.lil_config  # raises on out-of-range omegas
        if not self.label:
            object.__setattr__(
                self, "label", f"{self.algorithm}@{self.instance.sigma_bar_sq:g}"
            )

    @property
    def lil_config(self) -> LilConfig:
        return LilConfig.from_horizon(
            self.horizon,
            self.delta,
            self.epsilon,
            omega_mu=self.omega_mu,
            omega_v=self.omega_v,
            omega_v_prime=self.omega_v_prime,
        )

    def echo(self) -> dict:
        """Config summary for logs and summary documents."""
        config = self.lil_config
        return {
            "label": self.label,
            "instance": self.instance.name,
            "algorithm": self.algorithm,
            "T": self.horizon,
            "delta": self.delta,
            "sigma_bar_sq": self.instance.sigma_bar_sq,
            "epsilon": config.epsilon,
            "omega_mu": config.omega_mu,
            "omega_v": config.omega_v,
            "omega_v_prime": config.omega_v_prime,
            "master_seed": self.master_seed,
            "replications": self.replications,
        }


def checkpoint_grid(T: int, count: int = settings.CHECKPOINT_COUNT) -> np.ndarray:
    """Sorted, log-spaced time steps in [1, T], always ending at T."""
    grid = np.unique(np.rint(np.geomspace(1, T, num=min(count, T))).astype(int))
    if grid[-1] != T:
        grid = np.append(grid, T)
    return grid


def simulate_run(config: RunConfig, run_index: int) -> Trace:
    """Run replication ``run_index`` of ``config`` from its own seed."""
    partition = classify(config.instance)
    env = SemiBanditEnvironment.for_run(
        config.instance, config.master_seed, run_index, partition
    )
    run = ALGORITHMS[config.algorithm]
    return run(
        config.instance,
        env,
        config.horizon,
        delta=config.delta,
        config=config.lil_config,
        run_index=run_index,
    )


# ---------------------------------------------------------------------------
# Replication pool
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    """A trace reduced to its values at the checkpoint grid."""

    run_index: int
    pseudo_regret: np.ndarray
    realized_regret: np.ndarray
    cumulative_reward: np.ndarray
    unsafe: np.ndarray
    unsafe_count: np.ndarray
    any_violation: bool

    @classmethod
    def from_trace(cls, trace: Trace, checkpoints: np.ndarray) -> "RunSummary":
        rows = checkpoints - 1
        unsafe_count = trace.unsafe_count
        return cls(
            run_index=trace.run_index,
            pseudo_regret=trace.pseudo_regret[rows],
            realized_regret=trace.realized_regret[rows],
            cumulative_reward=trace.cumulative_reward[rows],
            unsafe=trace.unsafe[rows],
            unsafe_count=unsafe_count[rows],
            any_violation=bool(unsafe_count[-1] > 0),
        )


def _simulate_worker(args: Tuple[RunConfig, int, bool]) -> Tuple[RunSummary, Optional[Trace]]:
    """Run one replication and reduce it to a summary.

    Must be at module level (not a method) so ProcessPoolExecutor can pickle it.
    """
    config, run_index, keep_trace = args
    trace = simulate_run(config, run_index)
    summary = RunSummary.from_trace(trace, checkpoint_grid(config.horizon))
    return summary, trace if keep_trace else None


def _mean_and_se(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    if rows.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])


@dataclass
class Aggregate:
    """Mean and standard-error curves of N replications at the checkpoints."""

    label: str
    algorithm: str
    horizon: int
    checkpoints: np.ndarray
    mean_regret: np.ndarray
    se_regret: np.ndarray
    mean_realized_regret: np.ndarray
    se_realized_regret: np.ndarray
    mean_reward: np.ndarray
    se_reward: np.ndarray
    violation_fraction: np.ndarray
    mean_unsafe_count: np.ndarray
    any_violation: np.ndarray
    traces: List[Trace] = field(default_factory=list)

    @property
    def replications(self) -> int:
        return int(self.any_violation.size)

    @property
    def any_violation_rate(self) -> float:
        return float(self.any_violation.mean())

    @property
    def any_violation_se(self) -> float:
        """Binomial standard error of the any-violation rate."""
        p = self.any_violation_rate
        return math.sqrt(p * (1.0 - p) / self.replications)

    @property
    def final_regret(self) -> float:
        return float(self.mean_regret[-1])

    def summary(self) -> dict:
        return {
            "label": self.label,
            "algorithm": self.algorithm,
            "T": self.horizon,
            "replications": self.replications,
            "final_regret": self.final_regret,
            "final_regret_se": float(self.se_regret[-1]),
            "final_realized_regret": float(self.mean_realized_regret[-1]),
            "final_reward": float(self.mean_reward[-1]),
            "mean_unsafe_pulls": float(self.mean_unsafe_count[-1]),
            "any_violation_rate": self.any_violation_rate,
            "any_violation_se": self.any_violation_se,
        }

    @classmethod
    def from_summaries(
        cls,
        config: RunConfig,
        summaries: List[RunSummary],
        traces: Optional[List[Trace]] = None,
    ) -> "Aggregate":
        summaries = sorted(summaries, key=lambda s: s.run_index)

        def stack(name: str) -> np.ndarray:
            return np.vstack([getattr(s, name) for s in summaries]).astype(float)

        mean_regret, se_regret = _mean_and_se(stack("pseudo_regret"))
        mean_realized, se_realized = _mean_and_se(stack("realized_regret"))
        mean_reward, se_reward = _mean_and_se(stack("cumulative_reward"))
        return cls(
            label=config.label,
            algorithm=config.algorithm,
            horizon=config.horizon,
            checkpoints=checkpoint_grid(config.horizon),
            mean_regret=mean_regret,
            se_regret=se_regret,
            mean_realized_regret=mean_realized,
            se_realized_regret=se_realized,
            mean_reward=mean_reward,
            se_reward=se_reward,
            violation_fraction=stack("unsafe").mean(axis=0),
            mean_unsafe_count=stack("unsafe_count").mean(axis=0),
            any_violation=np.array([s.any_violation for s in summaries], dtype=bool),
            traces=sorted(traces or [], key=lambda t: t.run_index),
        )


def monte_carlo(config: RunConfig, parallel: int = 1, keep_traces: bool = False) -> Aggregate:
    """Run every replication of ``config`` and aggregate in run-index order.

    Args:
        config: The run to replicate.
        parallel: Worker processes; 1 runs in-process.
        keep_traces: Keep the full step ledgers on the aggregate.

    Returns:
        The aggregate, identical for any ``parallel``.
    """
    tasks = [(config, k, keep_traces) for k in range(config.replications)]
    results: Dict[int, Tuple[RunSummary, Optional[Trace]]] = {}

    if parallel <= 1 or len(tasks) == 1:
        for task in tasks:
            results[task[1]] = _simulate_worker(task)
    else:
        with ProcessPoolExecutor(max_workers=parallel) as executor:
            futures = {executor.submit(_simulate_worker, task): task[1] for task in tasks}
            for future in as_completed(futures):
                results[futures[future]] = future.result()

    ordered = [results[k] for k in sorted(results)]
    aggregate = Aggregate.from_summaries(
        config,
        [summary for summary, _ in ordered],
        [trace for _, trace in ordered if trace is not None],
    )
    logger.info(json.dumps({"event": "monte_carlo", **aggregate.summary()}, indent=2, default=str))
    return aggregate
