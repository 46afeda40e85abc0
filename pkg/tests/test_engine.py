import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from agent import settings
from agent.confidence import BoundsTable, ConfidenceState, LilConfig
from agent.engine import (
    EngineInvariantError,
    absolutely_safe_threshold,
    combucb1_run,
    greedy_split,
    init_select,
    oracle_select,
    pascomb_run,
    safe_sets,
)
from agent.environment import SemiBanditEnvironment
from instance.model import InstanceError, SolutionClass, classify
from lab.presets import set_instance


def run(algorithm, instance, T, seed=11, run_index=0):
    env = SemiBanditEnvironment.for_run(instance, seed, run_index)
    if algorithm == "pascomb":
        return pascomb_run(instance, env, T, run_index=run_index)
    return combucb1_run(instance, env, T, run_index=run_index)


# ---------------------------------------------------------------------------
# Greedy-Split
# ---------------------------------------------------------------------------


def test_greedy_split_packs_in_index_order():
    split = greedy_split((0, 1, 2, 3, 4), (0.3, 0.3, 0.2, 0.4, 0.25), 0.6)
    assert split.subsolutions == ((0, 1), (2, 3), (4,))
    assert split.n_p == 3


def test_greedy_split_one_item_per_bucket():
    assert greedy_split((0, 1, 2), (0.3, 0.3, 0.3), 0.4).n_p == 3


def test_greedy_split_keeps_an_oversized_item_alone():
    split = greedy_split((0, 1), (0.7, 0.1), 0.5)
    assert split.subsolutions == ((0,), (1,))


def test_greedy_split_below_the_proxy_pulls_unsafe_singletons():
    # sigma_bar_sq < sigma_sq: unpulled items sit at the clipped U^v = sigma_sq
    U_var = np.full(3, settings.SIGMA_SQ)
    split = greedy_split((0, 1, 2), U_var, 0.2)
    assert split.subsolutions == ((0,), (1,), (2,))
    assert all(U_var[list(sub)].sum() > 0.2 for sub in split.subsolutions)


def test_greedy_split_of_nothing():
    with pytest.raises(ValueError):
        greedy_split((), (0.1,), 0.5)


@given(
    st.lists(st.floats(min_value=0.0, max_value=0.25), min_size=1, max_size=8),
    st.floats(min_value=0.2501, max_value=1.0),
)
def test_greedy_split_partitions_and_fits_the_budget(u_var, budget):
    solution = tuple(range(len(u_var)))
    split = greedy_split(solution, u_var, budget)
    flattened = [i for sub in split.subsolutions for i in sub]
    assert flattened == list(solution)
    assert all(sub for sub in split.subsolutions)
    for sub in split.subsolutions:
        assert math.fsum(u_var[i] for i in sub) <= budget + 1e-12


def test_greedy_split_count_lies_within_the_lemma_range():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        size = int(rng.integers(1, 9))
        u_var = rng.uniform(0.0, 0.25, size)
        budget = float(rng.uniform(0.2501, 1.0))
        split = greedy_split(tuple(range(size)), u_var, budget)
        m = max(1, math.ceil(u_var.sum() / budget - 1e-9))
        Q = math.ceil(size / math.floor(budget / 0.25))
        assert m <= split.n_p <= 2 * m - 1
        assert split.n_p <= Q


# ---------------------------------------------------------------------------
# Threshold and initialization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "budget, expected",
    [(0.4, (1, 3)), (0.6, (2, 2)), (0.751, (3, 1)), (0.14, (0, 3))],
)
def test_absolutely_safe_threshold(budget, expected):
    assert absolutely_safe_threshold(set_instance(1 if budget > 0.25 else 2, budget)) == expected


def test_init_prefers_the_largest_cover(set1_checked):
    q, _ = absolutely_safe_threshold(set1_checked)
    chosen = init_select([0] * 10, set1_checked, q)
    assert set1_checked.solutions[chosen] == (0, 1)


def test_init_reaches_a_lonely_item_through_a_pair(set1_checked):
    pulls = [2] * 10
    pulls[6] = 1
    chosen = init_select(pulls, set1_checked, 2)
    assert set1_checked.solutions[chosen] == (0, 6)


def test_init_with_everything_pulled(set1_checked):
    with pytest.raises(ValueError):
        init_select([2] * 10, set1_checked, 2)


@pytest.mark.parametrize("budget, phases", [(0.6, 10), (0.4, 20)])
def test_pascomb_initialization_length(budget, phases):
    trace = run("pascomb", set_instance(1, budget), 200)
    init = [p for p in trace.phases if p.initialization]
    assert len(init) == phases
    assert all(len(trace.solutions[p.solution]) <= max(1, int(budget / 0.25)) for p in init)
    assert not any(p.initialization for p in trace.phases[phases:])


def test_combucb1_initialization(set1_constrained):
    trace = run("combucb1", set1_constrained, 50)
    init = [p for p in trace.phases if p.initialization]
    assert len(init) == 4
    assert trace.solutions[init[0].solution] == (0, 1, 2)


def test_short_horizon_stops_during_initialization(set1_constrained):
    trace = run("pascomb", set1_constrained, 5)
    assert trace.horizon == 5
    assert all(p.initialization for p in trace.phases)


# ---------------------------------------------------------------------------
# Safe sets and the oracle
# ---------------------------------------------------------------------------


def test_oracle_with_identical_items(set1_unconstrained):
    state = ConfidenceState(10, LilConfig.from_horizon(1000, 0.05))
    for i in range(10):
        state.observe([i, i], [0.4, 0.4])
    chosen = oracle_select(state.bounds_table(), set1_unconstrained)
    assert set1_unconstrained.solutions[chosen] == (0, 1, 2)


def test_empirically_safe_is_inside_possibly_safe(set1_constrained):
    state = ConfidenceState(10, LilConfig.from_horizon(1000, 0.05))
    rng = np.random.default_rng(9)
    for i in range(10):
        state.observe([i] * 30, rng.random(30))
    sets = safe_sets(state.bounds_table(), set1_constrained)
    assert not (sets.empirically_safe & ~sets.possibly_safe).any()


def test_oracle_without_possibly_safe_solutions(set1_constrained):
    table = BoundsTable.from_arrays(
        pulls=[5] * 10,
        mean=[0.5] * 10,
        variance=[0.25] * 10,
        U_mu=[1.0] * 10,
        L_mu=[0.0] * 10,
        U_var=[0.25] * 10,
        L_var=[0.45] * 10,
    )
    with pytest.raises(EngineInvariantError):
        oracle_select(table, set1_constrained)


def test_oracle_matches_brute_force(set1_constrained):
    rng = np.random.default_rng(17)
    instance = set1_constrained
    for _ in range(1000):
        l_var = rng.uniform(0.0, 0.3, 10)
        table = BoundsTable.from_arrays(
            pulls=[3] * 10,
            mean=rng.random(10),
            variance=l_var,
            U_mu=rng.uniform(0.0, 2.0, 10),
            L_mu=np.zeros(10),
            U_var=l_var + 0.1,
            L_var=l_var,
        )
        best, best_score = None, -math.inf
        for index, solution in enumerate(instance.solutions):
            if sum(l_var[i] for i in solution) >= instance.sigma_bar_sq:
                continue
            score = sum(table.U_mu[i] for i in solution)
            if score > best_score + 1e-12:
                best, best_score = index, score
        if best is None:
            continue
        chosen = oracle_select(table, instance)
        assert sum(table.U_mu[i] for i in instance.solutions[chosen]) == pytest.approx(best_score)


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------


def test_pascomb_never_pulls_an_unsafe_subsolution(set1_constrained):
    trace = run("pascomb", set1_constrained, 3000)
    assert trace.horizon == 3000
    assert int(trace.unsafe.sum()) == 0
    assert np.all(np.diff(trace.pseudo_regret) >= -1e-12)


def test_combucb1_pulls_the_risky_solution(set1_constrained):
    trace = run("combucb1", set1_constrained, 3000)
    assert int(trace.unsafe.sum()) > 0
    risky = classify(set1_constrained).risky
    assert any(trace.solutions[i] in risky for i in trace.solution_index)


def test_phase_ledger_matches_step_ledger(set1_checked):
    trace = run("pascomb", set1_checked, 2000)
    assert sum(p.pulls for p in trace.phases) == trace.horizon
    for p in trace.phases:
        assert p.pulls <= p.planned_pulls
        if not p.initialization and p.pulls == p.planned_pulls:
            steps = trace.pseudo_increment[p.start - 1:p.start - 1 + p.pulls]
            assert steps.sum() == pytest.approx(p.suboptimality_regret + p.safeness_regret)
            assert p.safeness_regret == pytest.approx(trace.mu_star * (p.pulls - 1))
    assert trace.phases[-1].start + trace.phases[-1].pulls - 1 == trace.horizon


def test_exceed_flags_agree_with_split_count(set1_constrained):
    trace = run("pascomb", set1_constrained, 2000)
    _, Q = absolutely_safe_threshold(set1_constrained)
    for p in trace.phases:
        if p.initialization:
            continue
        assert len(p.exceed_flags) == Q - 1
        flags = list(p.exceed_flags)
        assert flags == sorted(flags, reverse=True)


def test_same_seed_same_trace(set1_constrained):
    first = run("pascomb", set1_constrained, 500, seed=3, run_index=4)
    second = run("pascomb", set1_constrained, 500, seed=3, run_index=4)
    assert np.array_equal(first.solution_index, second.solution_index)
    assert np.array_equal(first.reward, second.reward)
    assert np.array_equal(first.realized_increment, second.realized_increment)


def test_runs_differ_across_run_indices(set1_constrained):
    first = run("pascomb", set1_constrained, 500, run_index=0)
    second = run("pascomb", set1_constrained, 500, run_index=1)
    assert not np.array_equal(first.reward, second.reward)


def test_combucb1_with_point_masses(point_mass_pair):
    trace = run("combucb1", point_mass_pair, 2000)
    assert np.mean(trace.solution_index == 0) > 0.8
    assert np.allclose(trace.reward[trace.solution_index == 0], 0.9)


def test_zero_variance_items_need_no_split(point_mass_pair):
    trace = run("pascomb", point_mass_pair, 500)
    assert all(p.planned_pulls == 1 for p in trace.phases)
    assert trace.pseudo_regret[-1] < 0.8 * 500


def test_horizon_must_be_positive(set1_constrained):
    env = SemiBanditEnvironment.for_run(set1_constrained, 1, 0)
    with pytest.raises(ValueError):
        pascomb_run(set1_constrained, env, 0)


def test_analysis_only_instance_cannot_be_simulated(three_items):
    with pytest.raises(InstanceError, match="no reward model"):
        SemiBanditEnvironment(three_items, 1)


def test_phase_classes_come_from_the_partition(set1_constrained):
    trace = run("pascomb", set1_constrained, 1000)
    labels = classify(set1_constrained).labels
    for p in trace.phases:
        assert p.solution_class == labels[p.solution]
        assert isinstance(p.solution_class, SolutionClass)


def test_every_solution_index_is_valid(set1_checked):
    trace = run("combucb1", set1_checked, 300)
    assert trace.solution_index.min() >= 0
    assert trace.solution_index.max() < len(trace.solutions)
    assert trace.phase[0] == 1


def test_single_phase_budget_never_splits(set1_unconstrained):
    trace = run("pascomb", set1_unconstrained, 1000)
    assert all(p.planned_pulls == 1 for p in trace.phases)
    assert all(p.safeness_regret == 0.0 for p in trace.phases)
