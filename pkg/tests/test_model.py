import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from instance.model import (
    InfeasibleMomentsError,
    Instance,
    InstanceError,
    NoSafeSolutionError,
    RewardModel,
    SolutionClass,
    SolutionFamily,
    beta_params_from_moments,
    classify,
    compute_gaps,
    enumerate_solutions,
    format_solution,
    kpath_instance,
    parse_solution_label,
    solution_moments,
)
from lab.presets import set_instance

KPATH_MEANS = {
    SolutionClass.OPTIMAL: 0.2,
    SolutionClass.SAFE_SUBOPTIMAL: 0.15,
    SolutionClass.RISKY: 0.3,
    SolutionClass.UNSAFE_SUBOPTIMAL: 0.062,
}
KPATH_CLASSES = [
    SolutionClass.OPTIMAL,
    SolutionClass.SAFE_SUBOPTIMAL,
    SolutionClass.RISKY,
    SolutionClass.UNSAFE_SUBOPTIMAL,
]


def build_kpath():
    return kpath_instance(
        num_paths=4,
        path_size=2,
        means_per_class=KPATH_MEANS,
        budget=0.33,
        path_classes=KPATH_CLASSES,
        unsafe_path_size=6,
    )


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def test_all_subsets_of_ten_items_up_to_three():
    assert len(enumerate_solutions(SolutionFamily.all_subsets(3), 10)) == 175


def test_single_item_family():
    assert enumerate_solutions(SolutionFamily.all_subsets(2), 1) == [(0,)]


def test_kpath_enumeration_in_canonical_order():
    solutions = enumerate_solutions(SolutionFamily.kpath([2, 2]), 4)
    assert solutions == [(0,), (1,), (2,), (3,), (0, 1), (2, 3)]
    assert {format_solution(s) for s in solutions} == {"{1}", "{2}", "{3}", "{4}", "{1,2}", "{3,4}"}


def test_kpath_must_cover_every_item():
    with pytest.raises(InstanceError, match="paths cover"):
        enumerate_solutions(SolutionFamily.kpath([2, 2]), 5)


def test_explicit_family_must_be_downward_closed():
    with pytest.raises(InstanceError, match=r"\{1,3\} is a subset of \{1,2,3\}"):
        SolutionFamily.explicit([(0,), (1,), (2,), (0, 1), (1, 2), (0, 1, 2)])


@given(st.integers(min_value=1, max_value=7), st.integers(min_value=1, max_value=4))
def test_enumeration_is_closed_and_canonical(L, K):
    solutions = enumerate_solutions(SolutionFamily.all_subsets(K), L)
    members = set(solutions)
    assert len(members) == len(solutions)
    assert all(s for s in solutions)
    assert solutions == sorted(solutions, key=lambda s: (len(s), s))
    for s in solutions:
        for i in range(len(s)):
            sub = s[:i] + s[i + 1:]
            assert not sub or sub in members


def test_solution_labels_round_trip():
    assert format_solution((0, 2, 3)) == "{1,3,4}"
    assert format_solution((0, 2, 3), style="label") == "1-3-4"
    assert parse_solution_label("1-3-4") == (0, 2, 3)


# ---------------------------------------------------------------------------
# Instances and moments
# ---------------------------------------------------------------------------


def test_solution_moments_of_set1(set1_constrained):
    mean, variance = solution_moments(set1_constrained, (0, 2, 3))
    assert mean == pytest.approx(1.25)
    assert variance == pytest.approx(0.29)
    assert solution_moments(set1_constrained, (4,)) == (0.3, 0.01)


def test_three_item_solutions_of_set2_have_variance_003():
    instance = set_instance(2, 0.14)
    triples = instance.solution_variances[instance.sizes == 3]
    assert np.allclose(triples, 0.03)


def test_solution_moments_rejects_unknown_items(set1_constrained):
    with pytest.raises(InstanceError, match="out of range"):
        solution_moments(set1_constrained, (10,))
    with pytest.raises(InstanceError, match="not a member"):
        solution_moments(set1_constrained, (0, 1, 2, 3))


def test_beta_variance_above_bernoulli_limit_is_infeasible():
    with pytest.raises(InfeasibleMomentsError):
        Instance((0.1, 0.5), (0.2, 0.01), "beta", 2, SolutionFamily.all_subsets(2), 0.3)


def test_beta_at_the_bernoulli_limit_becomes_bernoulli():
    instance = Instance((0.5, 0.3), (0.25, 0.0), "beta", 2, SolutionFamily.all_subsets(2), 0.3)
    assert instance.reward_models == (RewardModel.BERNOULLI, RewardModel.POINT_MASS)


def test_solution_on_the_budget_is_rejected():
    with pytest.raises(InstanceError, match="exactly equal"):
        Instance((0.5, 0.3), (0.1, 0.2), "beta", 2, SolutionFamily.all_subsets(2), 0.3)


def test_family_must_cover_every_item():
    family = SolutionFamily.explicit([(0,), (1,)])
    with pytest.raises(InstanceError, match=r"items \[3\]"):
        Instance((0.5, 0.3, 0.2), (0.01,) * 3, "beta", 2, family, 0.3)


def test_budget_below_proxy_is_accepted_with_warning(caplog):
    instance = set_instance(2, 0.14)
    assert instance.sigma_bar_sq == 0.14
    assert "no solution is absolutely safe" in caplog.text


def test_with_budget_keeps_everything_else(set1_constrained):
    relaxed = set1_constrained.with_budget(0.6)
    assert relaxed.sigma_bar_sq == 0.6
    assert relaxed.item_means == set1_constrained.item_means
    assert relaxed.solutions == set1_constrained.solutions


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def test_set1_constrained_classification(set1_constrained):
    partition = classify(set1_constrained)
    assert partition.optimal_safe == (0, 2, 3)
    assert partition.mu_star == pytest.approx(1.25)
    assert (0, 1, 2) in partition.risky


def test_set1_at_06_optimum_is_first_three_items(set1_checked):
    partition = classify(set1_checked)
    assert partition.optimal_safe == (0, 1, 2)
    assert partition.mu_star == pytest.approx(1.35)


def test_three_item_classification(three_items):
    partition = classify(three_items)
    assert partition.optimal_safe == (0, 2)
    assert partition.mu_star == pytest.approx(0.8)
    assert partition.risky == ((0, 1),)
    assert set(partition.safe_suboptimal) == {(0,), (1,), (2,), (1, 2)}
    assert partition.unsafe_suboptimal == ()


@pytest.mark.parametrize("budget", [0.4, 0.6, 0.751])
def test_partition_covers_the_family(budget):
    instance = set_instance(1, budget)
    partition = classify(instance)
    sizes = [len(partition.members(c)) for c in SolutionClass]
    assert sum(sizes) == len(instance.solutions) == 175
    for s in partition.risky:
        assert solution_moments(instance, s)[0] >= partition.mu_star
    for s in partition.safe_suboptimal:
        mean, variance = solution_moments(instance, s)
        assert variance < budget and mean < partition.mu_star


def test_enlarging_the_budget_never_lowers_mu_star():
    budgets = [0.3, 0.4, 0.5, 0.6, 0.751]
    mu_stars = [classify(set_instance(1, b)).mu_star for b in budgets]
    assert mu_stars == sorted(mu_stars)


def test_tied_optimum_keeps_canonical_first(caplog):
    instance = Instance(
        (0.4, 0.4, 0.1), (0.2, 0.2, 0.01), "beta", 2, SolutionFamily.all_subsets(2), 0.3
    )
    partition = classify(instance)
    assert partition.optimal_safe == (0, 2)
    assert (1, 2) in partition.risky
    assert "not unique" in caplog.text


def test_no_safe_solution():
    instance = Instance(
        (0.5, 0.5), (0.2, 0.2), RewardModel.NONE, 2, SolutionFamily.all_subsets(2), 0.1
    )
    with pytest.raises(NoSafeSolutionError):
        classify(instance)


# ---------------------------------------------------------------------------
# Gaps
# ---------------------------------------------------------------------------


def test_set2_variance_gap_of_triples():
    instance = set_instance(2, 0.14)
    gaps = compute_gaps(instance, 10_000, 0.05)
    assert gaps.variance_gap_star == pytest.approx(0.11)
    triples = gaps.variance_gaps[instance.sizes == 3]
    assert np.allclose(triples, 0.11)


def test_optimal_items_have_no_safe_suboptimal_minimum(set1_constrained):
    gaps = compute_gaps(set1_constrained, 10_000, 0.05)
    for i in (0, 2, 3):
        assert gaps.safe_suboptimal_min[i] is None
    assert gaps.safe_suboptimal_min[1] is not None
    assert "safe_suboptimal_min[item 1]" in gaps.undefined_entries()


def test_risky_variance_gap_of_three_items(three_items):
    gaps = compute_gaps(three_items, 1_000, 0.05)
    assert gaps.risky_variance_gap[1] == pytest.approx(0.05)
    assert gaps.risky_variance_gap[2] is None
    assert all(value is None for value in gaps.phi)


def test_tension_lies_in_unit_interval():
    instance = build_kpath()
    gaps = compute_gaps(instance, 10_000, 0.05)
    defined = [c for c in gaps.tension if c is not None]
    assert defined
    assert all(0.0 < c <= 1.0 for c in defined)


def test_psi_grows_with_horizon_and_shrinks_with_delta(set1_constrained):
    partition = classify(set1_constrained)
    short = compute_gaps(set1_constrained, 1_000, 0.05, partition)
    long = compute_gaps(set1_constrained, 100_000, 0.05, partition)
    loose = compute_gaps(set1_constrained, 1_000, 0.5, partition)
    for a, b, c in zip(short.psi, long.psi, loose.psi):
        if a is None:
            continue
        assert b >= a
        assert c <= a


def test_gaps_need_a_horizon_of_two(set1_constrained):
    with pytest.raises(ValueError):
        compute_gaps(set1_constrained, 1, 0.05)


# ---------------------------------------------------------------------------
# Beta parameters and generated instances
# ---------------------------------------------------------------------------


def test_beta_params_examples():
    assert beta_params_from_moments(0.3, 0.01) == pytest.approx((6.0, 14.0))
    assert beta_params_from_moments(0.5, 0.24) == pytest.approx((1 / 48, 1 / 48))
    with pytest.raises(InfeasibleMomentsError):
        beta_params_from_moments(0.5, 0.25)


@given(
    st.floats(min_value=0.01, max_value=0.99),
    st.floats(min_value=0.001, max_value=0.999),
)
def test_beta_params_reproduce_moments(mu, fraction):
    var = fraction * mu * (1 - mu)
    alpha, beta = beta_params_from_moments(mu, var)
    total = alpha + beta
    assert alpha / total == pytest.approx(mu, rel=1e-12)
    assert alpha * beta / (total * total * (total + 1)) == pytest.approx(var, rel=1e-9)


def test_kpath_paths_classify_as_intended():
    instance = build_kpath()
    partition = classify(instance)
    assert instance.L == 12 and instance.K == 6
    assert partition.optimal_safe == (0, 1)
    assert partition.risky == ((4, 5),)
    assert (6, 7, 8, 9, 10, 11) in partition.unsafe_suboptimal
    for i, mean in enumerate(instance.item_means):
        assert instance.item_variances[i] == pytest.approx(mean * (1 - mean))


def test_kpath_rejects_a_path_of_the_wrong_class():
    with pytest.raises(InstanceError, match="intended"):
        kpath_instance(
            num_paths=2,
            path_size=2,
            means_per_class={"optimal": 0.2, "safe_suboptimal": 0.3},
            budget=0.45,
        )
