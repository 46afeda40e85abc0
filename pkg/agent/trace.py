"""Per-step and per-phase records of a single bandit run."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from instance.model import Instance, SafetyPartition, Solution, SolutionClass

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhaseRecord:
    """One oracle selection and the sub-solutions pulled for it.

    ``exceed_flags[r - 1]`` records whether U^v of the selected solution
    exceeded ``r * sigma_bar_sq``, i.e. whether at least r+1 sub-solutions
    were needed.
    """

    phase: int
    start: int
    solution: int
    solution_class: SolutionClass
    subsolutions: Tuple[int, ...]
    planned_pulls: int
    pulls: int
    initialization: bool
    exceed_flags: Tuple[bool, ...]
    suboptimality_regret: float
    safeness_regret: float
    good_event: Optional[bool] = None
    empirically_safe: Optional[int] = None
    possibly_safe: Optional[int] = None


@dataclass
class Trace:
    algorithm: str
    instance_name: str
    run_index: int
    solutions: Tuple[Solution, ...]
    mu_star: float
    solution_index: np.ndarray
    phase: np.ndarray
    reward: np.ndarray
    pseudo_increment: np.ndarray
    realized_increment: np.ndarray
    unsafe: np.ndarray
    phases: List[PhaseRecord] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return int(self.solution_index.size)

    @property
    def pseudo_regret(self) -> np.ndarray:
        return np.cumsum(self.pseudo_increment)

    @property
    def realized_regret(self) -> np.ndarray:
        return np.cumsum(self.realized_increment)

    @property
    def cumulative_reward(self) -> np.ndarray:
        return np.cumsum(self.reward)

    @property
    def unsafe_count(self) -> np.ndarray:
        return np.cumsum(self.unsafe.astype(int))


class TraceRecorder:
    """Preallocated step ledger filled by the engine, one row per time step."""

    def __init__(
        self,
        algorithm: str,
        instance: Instance,
        partition: SafetyPartition,
        T: int,
        run_index: int = 0,
    ):
        self.algorithm = algorithm
        self.instance = instance
        self.partition = partition
        self.run_index = run_index
        self.t = 0
        self._solution_index = np.empty(T, dtype=int)
        self._phase = np.empty(T, dtype=int)
        self._reward = np.empty(T, dtype=float)
        self._pseudo = np.empty(T, dtype=float)
        self._realized = np.empty(T, dtype=float)
        self._unsafe = np.empty(T, dtype=bool)
        self._phases: List[PhaseRecord] = []

    @property
    def remaining(self) -> int:
        return self._solution_index.size - self.t

    def record_step(self, solution: int, phase: int, reward: float, reference: float) -> None:
        t = self.t
        self._solution_index[t] = solution
        self._phase[t] = phase
        self._reward[t] = reward
        self._pseudo[t] = self.partition.mu_star - self.instance.solution_means[solution]
        self._realized[t] = reference - reward
        self._unsafe[t] = self.instance.solution_variances[solution] >= self.instance.sigma_bar_sq
        self.t += 1

    def record_phase(self, record: PhaseRecord) -> None:
        self._phases.append(record)

    def finish(self) -> Trace:
        if self.remaining:
            raise RuntimeError(f"run ended after {self.t} of {self._solution_index.size} steps")
        return Trace(
            algorithm=self.algorithm,
            instance_name=self.instance.name,
            run_index=self.run_index,
            solutions=self.instance.solutions,
            mu_star=self.partition.mu_star,
            solution_index=self._solution_index,
            phase=self._phase,
            reward=self._reward,
            pseudo_increment=self._pseudo,
            realized_increment=self._realized,
            unsafe=self._unsafe,
            phases=self._phases,
        )
