"""Problem instances for the probably anytime-safe combinatorial semi-bandit.

An instance bundles per-item reward moments, a downward-closed solution
family and a variance budget. This module enumerates families in canonical
order, classifies every solution as optimal-safe, safe-suboptimal, risky or
unsafe-suboptimal, and computes the static gap quantities the bound
evaluators consume.

Item indices are 0-based in the library and 1-based in anything rendered for
humans (see ``format_solution``).
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Solution = Tuple[int, ...]

TIE_TOLERANCE = 1e-12


class InstanceError(ValueError):
    """Raised when an instance or a solution family is invalid."""


class NoSafeSolutionError(InstanceError):
    """Raised when no solution of the family satisfies the variance budget."""


class InfeasibleMomentsError(InstanceError):
    """Raised when a (mean, variance) pair cannot be realized on [0, 1]."""


class RewardModel(str, Enum):
    BETA = "beta"
    BERNOULLI = "bernoulli"
    POINT_MASS = "pointmass"
    # Analysis-only item: moments are taken as given and never sampled.
    NONE = "none"


class FamilyKind(str, Enum):
    SUBSETS = "subsets"
    KPATH = "kpath"
    EXPLICIT = "explicit"


class SolutionClass(str, Enum):
    OPTIMAL = "optimal"
    SAFE_SUBOPTIMAL = "safe_suboptimal"
    RISKY = "risky"
    UNSAFE_SUBOPTIMAL = "unsafe_suboptimal"


def canonical_key(solution: Solution) -> Tuple[int, Solution]:
    return (len(solution), solution)


def format_solution(solution: Iterable[int], style: str = "set") -> str:
    """Render a 0-based solution with 1-based labels, ``{1,3,4}`` or ``1-3-4``."""
    labels = [str(i + 1) for i in solution]
    if style == "label":
        return "-".join(labels)
    return "{" + ",".join(labels) + "}"


def parse_solution_label(label: str) -> Solution:
    """Inverse of ``format_solution(..., style="label")``."""
    return tuple(int(part) - 1 for part in str(label).split("-") if part)


# ---------------------------------------------------------------------------
# Solution families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolutionFamily:
    """A downward-closed family of nonempty item subsets.

    Use the constructors rather than the raw fields:

        SolutionFamily.all_subsets(3)
        SolutionFamily.kpath([2, 2])
        SolutionFamily.explicit([(0,), (1,), (0, 1)])
    """

    kind: FamilyKind
    max_size: int
    path_sizes: Tuple[int, ...] = ()
    members: Tuple[Solution, ...] = ()

    @classmethod
    def all_subsets(cls, max_size: int) -> "SolutionFamily":
        if max_size < 1:
            raise InstanceError(f"max solution size must be >= 1, got {max_size}")
        return cls(FamilyKind.SUBSETS, max_size=int(max_size))

    @classmethod
    def kpath(cls, path_sizes: Sequence[int]) -> "SolutionFamily":
        sizes = tuple(int(size) for size in path_sizes)
        if not sizes or min(sizes) < 1:
            raise InstanceError(f"path sizes must be positive, got {list(sizes)}")
        return cls(FamilyKind.KPATH, max_size=max(sizes), path_sizes=sizes)

    @classmethod
    def explicit(cls, members: Iterable[Iterable[int]]) -> "SolutionFamily":
        normalized = set()
        for member in members:
            solution = tuple(sorted(set(int(i) for i in member)))
            if not solution:
                raise InstanceError("explicit family contains an empty member")
            if solution[0] < 0:
                raise InstanceError(f"negative item index in member {solution}")
            normalized.add(solution)
        if not normalized:
            raise InstanceError("explicit family has no members")

        for solution in normalized:
            for size in range(1, len(solution)):
                for subset in itertools.combinations(solution, size):
                    if subset not in normalized:
                        raise InstanceError(
                            f"family is not downward-closed: {format_solution(subset)} "
                            f"is a subset of {format_solution(solution)} but not a member"
                        )

        ordered = tuple(sorted(normalized, key=canonical_key))
        return cls(
            FamilyKind.EXPLICIT,
            max_size=max(len(s) for s in ordered),
            members=ordered,
        )


def enumerate_solutions(family: SolutionFamily, L: int) -> List[Solution]:
    """List the family's members over ``L`` items in canonical order.

    Canonical order sorts by cardinality, then lexicographically by item
    index. The empty set is never a member.
    """
    if L < 1:
        raise InstanceError(f"need at least one item, got L={L}")

    if family.kind == FamilyKind.SUBSETS:
        return [
            combo
            for size in range(1, min(family.max_size, L) + 1)
            for combo in itertools.combinations(range(L), size)
        ]

    if family.kind == FamilyKind.KPATH:
        if sum(family.path_sizes) != L:
            raise InstanceError(
                f"paths cover {sum(family.path_sizes)} items but the instance has L={L}"
            )
        solutions = []
        start = 0
        for size in family.path_sizes:
            path = tuple(range(start, start + size))
            for k in range(1, size + 1):
                solutions.extend(itertools.combinations(path, k))
            start += size
        return sorted(solutions, key=canonical_key)

    for member in family.members:
        if member[-1] >= L:
            raise InstanceError(
                f"member {format_solution(member)} references item {member[-1] + 1} > L={L}"
            )
    return list(family.members)


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


def _normalize_reward_model(mean: float, variance: float, model: RewardModel) -> RewardModel:
    if model == RewardModel.BETA:
        if variance <= TIE_TOLERANCE:
            return RewardModel.POINT_MASS
        if math.isclose(variance, mean * (1.0 - mean), rel_tol=0.0, abs_tol=TIE_TOLERANCE):
            return RewardModel.BERNOULLI
    return model


@dataclass(frozen=True)
class Instance:
    """Item moments, solution family and variance budget of one problem.

    Args:
        item_means: Expected reward of each item.
        item_variances: Reward variance of each item.
        reward_models: One ``RewardModel`` (or its string value) per item,
            or a single one broadcast to all items.
        K: Maximum solution cardinality.
        family: The downward-closed solution family.
        sigma_bar_sq: Variance budget; a solution is safe iff its variance is
            strictly below it.
        sigma_sq: Sub-Gaussian proxy, also the clip for variance bounds.
        name: Label carried into traces and reports.
    """

    item_means: Tuple[float, ...]
    item_variances: Tuple[float, ...]
    reward_models: Union[Tuple[RewardModel, ...], RewardModel, str]
    K: int
    family: SolutionFamily
    sigma_bar_sq: float
    sigma_sq: float = 0.25
    name: str = "instance"

    def __post_init__(self):
        means = tuple(float(m) for m in self.item_means)
        variances = tuple(float(v) for v in self.item_variances)
        models = self.reward_models
        if isinstance(models, (str, RewardModel)):
            models = [models] * len(means)
        models = tuple(RewardModel(m) for m in models)
        if not (len(means) == len(variances) == len(models)):
            raise InstanceError(
                f"means ({len(means)}), variances ({len(variances)}) and reward models "
                f"({len(models)}) must have the same length"
            )
        models = tuple(
            _normalize_reward_model(m, v, model) for m, v, model in zip(means, variances, models)
        )
        object.__setattr__(self, "item_means", means)
        object.__setattr__(self, "item_variances", variances)
        object.__setattr__(self, "reward_models", models)
        object.__setattr__(self, "sigma_bar_sq", float(self.sigma_bar_sq))
        object.__setattr__(self, "sigma_sq", float(self.sigma_sq))
        self._validate()

    def _validate(self) -> None:
        if self.L < 1:
            raise InstanceError("an instance needs at least one item")
        if self.K < 1:
            raise InstanceError(f"K must be >= 1, got {self.K}")
        if self.K < 2:
            logger.warning(f"{self.name}: K={self.K} < 2, the problem is degenerate")
        if self.sigma_sq <= 0 or self.sigma_bar_sq <= 0:
            raise InstanceError("sigma_sq and sigma_bar_sq must be positive")
        if self.sigma_bar_sq <= self.sigma_sq:
            logger.warning(
                f"{self.name}: sigma_bar_sq={self.sigma_bar_sq} <= sigma_sq={self.sigma_sq}, "
                f"no solution is absolutely safe"
            )

        for i, (mean, variance, model) in enumerate(
            zip(self.item_means, self.item_variances, self.reward_models)
        ):
            item = i + 1
            if not (math.isfinite(mean) and math.isfinite(variance)) or variance < 0:
                raise InstanceError(f"item {item}: invalid moments ({mean}, {variance})")
            if model == RewardModel.NONE:
                continue
            if not 0.0 <= mean <= 1.0:
                raise InstanceError(f"item {item}: mean {mean} outside [0, 1]")
            if variance > 0.25:
                raise InstanceError(f"item {item}: variance {variance} exceeds 0.25")
            if model == RewardModel.BETA and variance > mean * (1.0 - mean):
                raise InfeasibleMomentsError(
                    f"item {item}: variance {variance} exceeds mean*(1-mean)={mean * (1 - mean)}"
                )
            if model == RewardModel.BERNOULLI and not math.isclose(
                variance, mean * (1.0 - mean), rel_tol=0.0, abs_tol=1e-9
            ):
                raise InstanceError(
                    f"item {item}: a Bernoulli item with mean {mean} has variance "
                    f"{mean * (1 - mean)}, got {variance}"
                )
            if model == RewardModel.POINT_MASS and variance > TIE_TOLERANCE:
                raise InstanceError(f"item {item}: point-mass item with variance {variance}")
            if variance > self.sigma_sq:
                logger.warning(
                    f"{self.name}: item {item} variance {variance} exceeds sigma_sq={self.sigma_sq}"
                )

        solutions = self.solutions
        largest = max(len(s) for s in solutions)
        if largest > self.K:
            raise InstanceError(f"family has a member of size {largest} > K={self.K}")
        covered = set(itertools.chain.from_iterable(solutions))
        missing = sorted(set(range(self.L)) - covered)
        if missing:
            raise InstanceError(
                f"items {[i + 1 for i in missing]} belong to no solution of the family"
            )
        on_budget = np.flatnonzero(
            np.isclose(self.solution_variances, self.sigma_bar_sq, rtol=0.0, atol=TIE_TOLERANCE)
        )
        if on_budget.size:
            raise InstanceError(
                f"solution {format_solution(solutions[on_budget[0]])} has variance exactly "
                f"equal to sigma_bar_sq={self.sigma_bar_sq}"
            )

    @property
    def L(self) -> int:
        return len(self.item_means)

    @cached_property
    def solutions(self) -> Tuple[Solution, ...]:
        return tuple(enumerate_solutions(self.family, self.L))

    @cached_property
    def solution_index(self) -> Dict[Solution, int]:
        return {s: idx for idx, s in enumerate(self.solutions)}

    @cached_property
    def means(self) -> np.ndarray:
        return _frozen(np.asarray(self.item_means, dtype=float))

    @cached_property
    def variances(self) -> np.ndarray:
        return _frozen(np.asarray(self.item_variances, dtype=float))

    @cached_property
    def incidence(self) -> np.ndarray:
        """Solutions-by-items 0/1 matrix in canonical row order."""
        matrix = np.zeros((len(self.solutions), self.L), dtype=float)
        for row, solution in enumerate(self.solutions):
            matrix[row, list(solution)] = 1.0
        return _frozen(matrix)

    @cached_property
    def sizes(self) -> np.ndarray:
        return _frozen(np.array([len(s) for s in self.solutions], dtype=int))

    @cached_property
    def solution_means(self) -> np.ndarray:
        return _frozen(
            np.array([math.fsum(self.item_means[i] for i in s) for s in self.solutions])
        )

    @cached_property
    def solution_variances(self) -> np.ndarray:
        return _frozen(
            np.array([math.fsum(self.item_variances[i] for i in s) for s in self.solutions])
        )

    def with_budget(self, sigma_bar_sq: float) -> "Instance":
        return replace(self, sigma_bar_sq=sigma_bar_sq)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def solution_moments(instance: Instance, solution: Iterable[int]) -> Tuple[float, float]:
    """Return ``(mu_S, var_S)``, the exact sums of the item moments of ``solution``."""
    items = tuple(sorted(int(i) for i in solution))
    for i in items:
        if not 0 <= i < instance.L:
            raise InstanceError(f"item index {i + 1} out of range 1..{instance.L}")
    if items not in instance.solution_index:
        raise InstanceError(f"{format_solution(items)} is not a member of the family")
    return (
        math.fsum(instance.item_means[i] for i in items),
        math.fsum(instance.item_variances[i] for i in items),
    )


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SafetyPartition:
    optimal_safe: Solution
    mu_star: float
    safe_suboptimal: Tuple[Solution, ...]
    risky: Tuple[Solution, ...]
    unsafe_suboptimal: Tuple[Solution, ...]
    # class of every solution, indexed like Instance.solutions
    labels: Tuple[SolutionClass, ...]

    @property
    def optimal_index(self) -> int:
        return self.labels.index(SolutionClass.OPTIMAL)

    def members(self, solution_class: SolutionClass) -> Tuple[Solution, ...]:
        if solution_class == SolutionClass.OPTIMAL:
            return (self.optimal_safe,)
        return {
            SolutionClass.SAFE_SUBOPTIMAL: self.safe_suboptimal,
            SolutionClass.RISKY: self.risky,
            SolutionClass.UNSAFE_SUBOPTIMAL: self.unsafe_suboptimal,
        }[solution_class]


def classify(instance: Instance) -> SafetyPartition:
    """Partition the family around the optimal safe solution S*.

    S* maximizes the mean over safe solutions; ties go to the first solution
    in canonical order and are logged.
    """
    means = instance.solution_means
    safe = instance.solution_variances < instance.sigma_bar_sq
    if not safe.any():
        raise NoSafeSolutionError(
            f"no safe solution: every member of {instance.name} has variance >= "
            f"sigma_bar_sq={instance.sigma_bar_sq}"
        )

    safe_indices = np.flatnonzero(safe)
    star = int(safe_indices[np.argmax(means[safe_indices])])
    mu_star = float(means[star])

    def _ties(value: float) -> bool:
        return math.isclose(value, mu_star, rel_tol=TIE_TOLERANCE, abs_tol=TIE_TOLERANCE)

    tied = [int(idx) for idx in safe_indices if idx != star and _ties(means[idx])]
    if tied:
        logger.warning(
            f"{instance.name}: optimal safe solution is not unique; keeping "
            f"{format_solution(instance.solutions[star])} over "
            f"{[format_solution(instance.solutions[idx]) for idx in tied]}"
        )

    labels = []
    for idx in range(len(instance.solutions)):
        if idx == star:
            labels.append(SolutionClass.OPTIMAL)
        elif means[idx] < mu_star and not _ties(means[idx]):
            labels.append(
                SolutionClass.SAFE_SUBOPTIMAL if safe[idx] else SolutionClass.UNSAFE_SUBOPTIMAL
            )
        else:
            labels.append(SolutionClass.RISKY)

    def _collect(solution_class: SolutionClass) -> Tuple[Solution, ...]:
        return tuple(
            s for s, label in zip(instance.solutions, labels) if label == solution_class
        )

    return SafetyPartition(
        optimal_safe=instance.solutions[star],
        mu_star=mu_star,
        safe_suboptimal=_collect(SolutionClass.SAFE_SUBOPTIMAL),
        risky=_collect(SolutionClass.RISKY),
        unsafe_suboptimal=_collect(SolutionClass.UNSAFE_SUBOPTIMAL),
        labels=tuple(labels),
    )


# ---------------------------------------------------------------------------
# Gaps
# ---------------------------------------------------------------------------

OptionalValues = Tuple[Optional[float], ...]


@dataclass(frozen=True)
class GapTable:
    """Per-solution and per-item gap quantities of a classified instance.

    Per-item entries are ``None`` when the defining index set is empty.
    """

    horizon: int
    delta: float
    mean_gaps: np.ndarray
    variance_gaps: np.ndarray
    variance_gap_star: float
    safe_suboptimal_min: OptionalValues
    unsafe_suboptimal_min: OptionalValues
    tension: OptionalValues
    risky_variance_gap: OptionalValues
    psi: OptionalValues
    psi_prime: OptionalValues
    phi: OptionalValues

    def undefined_entries(self) -> List[str]:
        entries = []
        for field_name in (
            "safe_suboptimal_min",
            "unsafe_suboptimal_min",
            "tension",
            "risky_variance_gap",
            "psi",
            "psi_prime",
            "phi",
        ):
            for i, value in enumerate(getattr(self, field_name)):
                if value is None:
                    entries.append(f"{field_name}[item {i + 1}]")
        return entries


def _per_item(
    instance: Instance,
    members: Sequence[int],
    reduce,
    value,
    skip: Iterable[int] = (),
) -> OptionalValues:
    skip = set(skip)
    out: List[Optional[float]] = []
    for i in range(instance.L):
        values = [value(idx) for idx in members if i in instance.solutions[idx]]
        out.append(float(reduce(values)) if values and i not in skip else None)
    return tuple(out)


def compute_gaps(
    instance: Instance,
    T: int,
    delta_T: float,
    partition: Optional[SafetyPartition] = None,
) -> GapTable:
    """Evaluate every static gap of ``instance`` for horizon ``T`` and ``delta_T``."""
    if T < 2:
        raise ValueError(f"horizon must be >= 2, got {T}")
    if not 0.0 < delta_T < 1.0:
        raise ValueError(f"delta_T must be in (0, 1), got {delta_T}")
    partition = partition or classify(instance)

    mean_gaps = _frozen(partition.mu_star - instance.solution_means)
    variance_gaps = _frozen(np.abs(instance.solution_variances - instance.sigma_bar_sq))
    labels = partition.labels
    indices = {
        c: [idx for idx, label in enumerate(labels) if label == c] for c in SolutionClass
    }
    safe_sub = indices[SolutionClass.SAFE_SUBOPTIMAL]
    unsafe_sub = indices[SolutionClass.UNSAFE_SUBOPTIMAL]

    log_T = math.log(T)
    log_T_delta = math.log(T / delta_T)
    log_inv_delta = math.log(1.0 / delta_T)

    def _hardness(log_variance: float):
        def value(idx: int) -> float:
            return min(
                log_T / mean_gaps[idx] ** 2,
                9.0 * log_variance / variance_gaps[idx] ** 2,
            )

        return value

    def _tension(idx: int) -> float:
        gap = mean_gaps[idx]
        return (gap / max(gap, variance_gaps[idx] / 3.0)) ** 2

    gaps = GapTable(
        horizon=int(T),
        delta=float(delta_T),
        mean_gaps=mean_gaps,
        variance_gaps=variance_gaps,
        variance_gap_star=float(variance_gaps[partition.optimal_index]),
        safe_suboptimal_min=_per_item(
            instance, safe_sub, min, lambda idx: mean_gaps[idx], skip=partition.optimal_safe
        ),
        unsafe_suboptimal_min=_per_item(instance, unsafe_sub, min, lambda idx: mean_gaps[idx]),
        tension=_per_item(instance, unsafe_sub, max, _tension),
        risky_variance_gap=_per_item(
            instance, indices[SolutionClass.RISKY], min, lambda idx: variance_gaps[idx]
        ),
        psi=_per_item(instance, safe_sub, max, _hardness(log_T_delta)),
        psi_prime=_per_item(instance, safe_sub, max, _hardness(log_inv_delta)),
        phi=_per_item(instance, unsafe_sub, max, _hardness(log_T)),
    )
    for entry in gaps.undefined_entries():
        logger.debug(f"{instance.name}: {entry} is undefined (empty index set)")
    return gaps


# ---------------------------------------------------------------------------
# Reward moments and generated instances
# ---------------------------------------------------------------------------


def beta_params_from_moments(mu: float, var: float) -> Tuple[float, float]:
    """Beta(alpha, beta) parameters with mean ``mu`` and variance ``var``."""
    if not 0.0 < mu < 1.0:
        raise InfeasibleMomentsError(f"Beta mean must be in (0, 1), got {mu}")
    if not 0.0 < var < mu * (1.0 - mu):
        raise InfeasibleMomentsError(
            f"Beta variance must be in (0, mu*(1-mu)={mu * (1 - mu)}), got {var}"
        )
    alpha = mu * (mu * (1.0 - mu) / var - 1.0)
    return alpha, alpha * (1.0 / mu - 1.0)


def kpath_instance(
    num_paths: int,
    path_size: int,
    means_per_class: Mapping[Union[SolutionClass, str], float],
    budget: float,
    path_classes: Optional[Sequence[Union[SolutionClass, str]]] = None,
    unsafe_path_size: Optional[int] = None,
    sigma_sq: float = 0.25,
    name: str = "kpath",
) -> Instance:
    """Build a K-path instance of Bernoulli items.

    Every item on a path shares the mean of the path's class. Unsafe-suboptimal
    paths may be longer than the others (``unsafe_path_size``), which is how
    an unsafe path can stay below the optimal mean. The full set of each path
    must classify as its intended class, otherwise ``InstanceError`` is raised.

    Args:
        num_paths: Number of disjoint paths.
        path_size: Items per path.
        means_per_class: Item mean for each class used.
        budget: Variance budget sigma_bar_sq.
        path_classes: Class of each path; defaults to one optimal path followed
            by safe-suboptimal paths.
    """
    if num_paths < 1 or path_size < 1:
        raise InstanceError("need at least one path with at least one item")
    if path_classes is None:
        path_classes = [SolutionClass.OPTIMAL] + [SolutionClass.SAFE_SUBOPTIMAL] * (num_paths - 1)
    classes = [SolutionClass(c) for c in path_classes]
    if len(classes) != num_paths:
        raise InstanceError(f"{len(classes)} path classes given for {num_paths} paths")
    class_means = {SolutionClass(c): float(m) for c, m in means_per_class.items()}

    sizes, means = [], []
    for path_class in classes:
        if path_class not in class_means:
            raise InstanceError(f"no mean given for class {path_class.value}")
        mean = class_means[path_class]
        if not 0.0 < mean < 1.0:
            raise InfeasibleMomentsError(f"{path_class.value} mean {mean} outside (0, 1)")
        size = path_size
        if path_class == SolutionClass.UNSAFE_SUBOPTIMAL and unsafe_path_size:
            size = unsafe_path_size
        sizes.append(size)
        means.extend([mean] * size)

    instance = Instance(
        item_means=means,
        item_variances=[m * (1.0 - m) for m in means],
        reward_models=RewardModel.BERNOULLI,
        K=max(sizes),
        family=SolutionFamily.kpath(sizes),
        sigma_bar_sq=budget,
        sigma_sq=sigma_sq,
        name=name,
    )

    partition = classify(instance)
    start = 0
    for number, (size, intended) in enumerate(zip(sizes, classes), start=1):
        path = tuple(range(start, start + size))
        actual = partition.labels[instance.solution_index[path]]
        if actual != intended:
            raise InstanceError(
                f"path {number} {format_solution(path)} classifies as {actual.value}, "
                f"intended {intended.value}"
            )
        start += size
    return instance
