"""PASCombUCB with Greedy-Split, and the CombUCB1 baseline.

PASCombUCB runs in phases. After an initialization that pulls absolutely
safe solutions until every item has two observations, each phase picks the
possibly-safe solution with the largest mean UCB, splits it greedily into
sub-solutions whose variance UCBs fit the budget, and pulls those one per
time step. CombUCB1 pulls the family member with the largest mean UCB every
step and ignores the budget; its unsafe pulls are only recorded.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from agent import settings
from agent.confidence import BoundsTable, ConfidenceState, LilConfig
from agent.environment import SemiBanditEnvironment
from agent.trace import PhaseRecord, Trace, TraceRecorder
from instance.model import Instance, Solution, format_solution

logger = logging.getLogger(__name__)


class EngineInvariantError(RuntimeError):
    """Raised when a run violates an invariant the algorithm guarantees."""


@dataclass(frozen=True)
class SplitResult:
    subsolutions: Tuple[Solution, ...]

    @property
    def n_p(self) -> int:
        return len(self.subsolutions)


@dataclass(frozen=True)
class SafeSets:
    """Masks over ``Instance.solutions``; empirically safe implies possibly safe."""

    empirically_safe: np.ndarray
    possibly_safe: np.ndarray


def absolutely_safe_threshold(instance: Instance) -> Tuple[int, int]:
    """Return ``(q, Q)``: q = floor(sigma_bar_sq / sigma_sq), Q = ceil(K / q).

    Below the sub-Gaussian proxy q is 0 and no solution is safe with
    certainty; Q then falls back to K, the most sub-solutions a split can need.
    """
    q = math.floor(instance.sigma_bar_sq / instance.sigma_sq)
    Q = instance.K if q == 0 else math.ceil(instance.K / q)
    return q, Q


def _solution_sums(instance: Instance, values: np.ndarray) -> np.ndarray:
    if np.all(np.isfinite(values)):
        return instance.incidence @ values
    return np.where(instance.incidence > 0, values[np.newaxis, :], 0.0).sum(axis=1)


def init_select(pulls: Sequence[int], instance: Instance, q: int, min_pulls: int = 2) -> int:
    """Index of the family member covering the most under-pulled items.

    Candidates have at most ``max(q, 1)`` items. Ties go to the larger
    solution, then to canonical order.
    """
    under = (np.asarray(pulls) < min_pulls).astype(float)
    if not under.any():
        raise ValueError("every item already has the required pulls")
    counts = np.where(instance.sizes <= max(q, 1), instance.incidence @ under, -1.0)
    sizes = np.where(counts == counts.max(), instance.sizes, -1)
    return int(np.argmax(sizes))


def safe_sets(table: BoundsTable, instance: Instance) -> SafeSets:
    return SafeSets(
        empirically_safe=_solution_sums(instance, table.U_var) < instance.sigma_bar_sq,
        possibly_safe=_solution_sums(instance, table.L_var) < instance.sigma_bar_sq,
    )


def oracle_select(
    table: BoundsTable, instance: Instance, sets: Optional[SafeSets] = None
) -> int:
    """Index of the possibly-safe solution with the largest mean UCB."""
    sets = sets or safe_sets(table, instance)
    if not sets.possibly_safe.any():
        raise EngineInvariantError("possibly-safe set is empty")
    scores = np.where(sets.possibly_safe, _solution_sums(instance, table.U_mu), -np.inf)
    return int(np.argmax(scores))


def greedy_split(
    solution: Sequence[int],
    item_U_var: Sequence[float],
    sigma_bar_sq: float,
    tolerance: float = settings.SPLIT_TOLERANCE,
) -> SplitResult:
    """Split ``solution`` into sub-solutions whose summed U^v fits the budget.

    Items are taken in ascending index order; an item joins the current
    sub-solution when the running sum stays within ``sigma_bar_sq`` and opens a
    new one otherwise. A sub-solution is never left empty.

    An item whose own U^v already exceeds ``sigma_bar_sq`` is still pulled as a
    singleton, and that pull is unsafe. This only happens when
    ``sigma_bar_sq < sigma_sq`` (q = 0); in that regime a phase carries no
    per-step safety guarantee.
    """
    if not len(solution):
        raise ValueError("cannot split an empty solution")
    buckets = []
    current = []
    load = 0.0
    for i in sorted(solution):
        u = float(item_U_var[i])
        if current and load + u > sigma_bar_sq + tolerance:
            buckets.append(tuple(current))
            current, load = [], 0.0
        current.append(i)
        load += u
    buckets.append(tuple(current))
    return SplitResult(tuple(buckets))


def _pull(
    env: SemiBanditEnvironment,
    recorder: TraceRecorder,
    instance: Instance,
    solution_index: int,
    phase: int,
) -> np.ndarray:
    rewards = env.pull(instance.solutions[solution_index])
    recorder.record_step(solution_index, phase, float(rewards.sum()), env.reference_reward())
    return rewards


def pascomb_run(
    instance: Instance,
    env: SemiBanditEnvironment,
    T: int,
    delta: float = settings.DELTA,
    config: Optional[LilConfig] = None,
    run_index: int = 0,
) -> Trace:
    """Run PASCombUCB for exactly ``T`` time steps.

    Args:
        instance: Problem instance; its true moments only feed the ledgers.
        env: Reward environment seeded for this run.
        T: Horizon, the total number of pulled sub-solutions.
        delta: Probability budget of the anytime-safe constraint.
        config: Confidence parameters; defaults to the schedule for (T, delta).
        run_index: Replication number carried into the trace.

    Returns:
        The step and phase ledgers of the run.
    """
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    config = config or LilConfig.from_horizon(T, delta)
    partition = env.partition
    mu_star = partition.mu_star
    q, Q = absolutely_safe_threshold(instance)
    if q == 0:
        logger.warning(
            f"{instance.name}: sigma_bar_sq={instance.sigma_bar_sq} < sigma_sq, "
            f"initialization pulls single items"
        )

    state = ConfidenceState(instance.L, config, instance.sigma_sq)
    recorder = TraceRecorder("pascomb", instance, partition, T, run_index)
    mean_gaps = mu_star - instance.solution_means
    phase = 0

    while recorder.remaining and (state.pulls < 2).any():
        phase += 1
        chosen = init_select(state.pulls, instance, q)
        start = recorder.t + 1
        rewards = _pull(env, recorder, instance, chosen, phase)
        state.observe(instance.solutions[chosen], rewards)
        recorder.record_phase(
            PhaseRecord(
                phase=phase,
                start=start,
                solution=chosen,
                solution_class=partition.labels[chosen],
                subsolutions=(chosen,),
                planned_pulls=1,
                pulls=1,
                initialization=True,
                exceed_flags=(),
                suboptimality_regret=float(mean_gaps[chosen]),
                safeness_regret=0.0,
            )
        )
    logger.debug(f"{instance.name}: initialization took {phase} phases")

    while recorder.remaining:
        phase += 1
        table = state.bounds_table()
        sets = safe_sets(table, instance)
        chosen = oracle_select(table, instance, sets)
        solution = instance.solutions[chosen]
        split = greedy_split(solution, table.U_var, instance.sigma_bar_sq)
        solution_U_var = math.fsum(table.U_var[i] for i in solution)
        exceed_flags = tuple(solution_U_var > r * instance.sigma_bar_sq for r in range(1, Q))
        good_event = state.good_event(instance.item_means, instance.item_variances)

        pulls = min(split.n_p, recorder.remaining)
        subsolutions = tuple(instance.solution_index[s] for s in split.subsolutions[:pulls])
        start = recorder.t + 1
        items, rewards = [], []
        for sub in subsolutions:
            items.extend(instance.solutions[sub])
            rewards.extend(_pull(env, recorder, instance, sub, phase))
        state.observe(items, rewards)

        if pulls == split.n_p:
            step_regret = math.fsum(mean_gaps[sub] for sub in subsolutions)
            phase_regret = mean_gaps[chosen] + mu_star * (pulls - 1)
            if not math.isclose(step_regret, phase_regret, rel_tol=1e-9, abs_tol=1e-9):
                raise EngineInvariantError(
                    f"phase {phase}: sub-solution regret {step_regret} != {phase_regret} "
                    f"for {format_solution(solution)}"
                )

        recorder.record_phase(
            PhaseRecord(
                phase=phase,
                start=start,
                solution=chosen,
                solution_class=partition.labels[chosen],
                subsolutions=subsolutions,
                planned_pulls=split.n_p,
                pulls=pulls,
                initialization=False,
                exceed_flags=exceed_flags,
                suboptimality_regret=float(mean_gaps[chosen]),
                safeness_regret=mu_star * (pulls - 1),
                good_event=good_event,
                empirically_safe=int(sets.empirically_safe.sum()),
                possibly_safe=int(sets.possibly_safe.sum()),
            )
        )

    return recorder.finish()


def combucb1_run(
    instance: Instance,
    env: SemiBanditEnvironment,
    T: int,
    config: Optional[LilConfig] = None,
    delta: float = settings.DELTA,
    run_index: int = 0,
) -> Trace:
    """Run CombUCB1 with the LIL mean radius for exactly ``T`` time steps.

    Every item is first observed once through maximal-coverage family members;
    afterwards each step pulls the member with the largest summed mean UCB.
    """
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    config = config or LilConfig.from_horizon(T, delta)
    partition = env.partition
    state = ConfidenceState(instance.L, config, instance.sigma_sq)
    recorder = TraceRecorder("combucb1", instance, partition, T, run_index)
    mean_gaps = partition.mu_star - instance.solution_means

    phase = 0
    while recorder.remaining:
        phase += 1
        initialization = bool((state.pulls < 1).any())
        if initialization:
            chosen = init_select(state.pulls, instance, instance.K, min_pulls=1)
        else:
            table = state.bounds_table()
            chosen = int(np.argmax(_solution_sums(instance, table.U_mu)))
        start = recorder.t + 1
        rewards = _pull(env, recorder, instance, chosen, phase)
        state.observe(instance.solutions[chosen], rewards)
        recorder.record_phase(
            PhaseRecord(
                phase=phase,
                start=start,
                solution=chosen,
                solution_class=partition.labels[chosen],
                subsolutions=(chosen,),
                planned_pulls=1,
                pulls=1,
                initialization=initialization,
                exceed_flags=(),
                suboptimality_regret=float(mean_gaps[chosen]),
                safeness_regret=0.0,
            )
        )

    return recorder.finish()
