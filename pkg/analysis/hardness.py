"""Hardness parameters and regret-bound evaluators.

Evaluates the explicit-constant machinery behind the PASCombUCB regret
guarantee: the constants C, gamma and D, the sample-count thresholds m_j,
the per-class g and h functions, the phase thresholds T'_r, the hardness
parameter H(r', instance) and the three regret terms. All functions are
pure; undefined gaps (empty classes for an item) drop their terms.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from agent import settings
from agent.confidence import LilConfig, lil_gamma, ln_ln_plus, xi
from agent.engine import absolutely_safe_threshold
from instance.model import (
    GapTable,
    Instance,
    SafetyPartition,
    SolutionClass,
    classify,
    compute_gaps,
)

logger = logging.getLogger(__name__)

SERIES_RATIO = 4.0 / 9.0

PER_ITEM_CLASSES = (
    SolutionClass.SAFE_SUBOPTIMAL,
    SolutionClass.RISKY,
    SolutionClass.UNSAFE_SUBOPTIMAL,
)


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


def a_coefficient(j: int) -> float:
    return 4.0 / 9.0 ** (j - 2)


def b_coefficient(j: int) -> float:
    return 1.0 / 4.0**j


def series_constant(rel_tol: float = 1e-12) -> float:
    """Sum of a_j / b_j, truncated once the geometric tail is below ``rel_tol``."""
    total, j = 0.0, 1
    while True:
        term = a_coefficient(j) / b_coefficient(j)
        total += term
        if term * SERIES_RATIO / (1.0 - SERIES_RATIO) < rel_tol * total:
            return total
        j += 1


def d_constant(K: int, epsilon: float) -> float:
    return math.log(
        324.0 * K * K * (1.0 + epsilon) ** 2 * (1.0 + math.sqrt(epsilon)) ** 2
    )


@dataclass(frozen=True)
class HardnessConstants:
    K: int
    epsilon: float
    C: float
    gamma: float
    D: float

    @classmethod
    def build(cls, K: int, epsilon: float = settings.EPSILON) -> "HardnessConstants":
        return cls(
            K=K,
            epsilon=epsilon,
            C=series_constant(),
            gamma=lil_gamma(epsilon),
            D=d_constant(K, epsilon),
        )

    @property
    def scale(self) -> float:
        """The common factor C * gamma * K."""
        return self.C * self.gamma * self.K


def m_j(j: int, x: Optional[float], omega: float, K: int, epsilon: float = settings.EPSILON) -> float:
    """Pull-count threshold of level ``j`` for gap ``x``; ``inf`` when undefined."""
    if j < 1:
        raise ValueError(f"j must be >= 1, got {j}")
    if x is None or x <= 0.0 or not 0.0 < omega < math.log(1.0 + epsilon) / math.e:
        return math.inf
    return (
        a_coefficient(j)
        * lil_gamma(epsilon)
        * K
        * K
        / (x * x)
        * (2.0 * math.log(1.0 / omega) + ln_ln_plus(1.0 / (x * x)) + d_constant(K, epsilon))
    )


# ---------------------------------------------------------------------------
# g and h functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HardnessContext:
    """Everything the g and h functions need besides the gap itself."""

    constants: HardnessConstants
    config: LilConfig
    sigma_bar_sq: float
    Q: int

    @classmethod
    def for_instance(
        cls, instance: Instance, config: LilConfig
    ) -> "HardnessContext":
        _, Q = absolutely_safe_threshold(instance)
        return cls(
            constants=HardnessConstants.build(instance.K, config.epsilon),
            config=config,
            sigma_bar_sq=instance.sigma_bar_sq,
            Q=Q,
        )

    def log_inverse(self, omega: float) -> float:
        return math.log(1.0 / omega)

    @property
    def omega_mu_v(self) -> float:
        return max(self.config.omega_mu, self.config.omega_v)

    @property
    def omega_v_v_prime(self) -> float:
        return max(self.config.omega_v, self.config.omega_v_prime)

    @property
    def omega_max(self) -> float:
        return max(self.config.omega_mu, self.config.omega_v, self.config.omega_v_prime)

    @property
    def omega_sum(self) -> float:
        return math.sqrt(self.log_inverse(self.config.omega_v_prime)) + math.sqrt(
            self.log_inverse(self.config.omega_v)
        )


@dataclass(frozen=True)
class _Profile:
    x: float
    step: float
    bracket: float
    coefficient: float

    @property
    def changing_point(self) -> int:
        return math.floor(self.x / self.step)


def _profile(solution_class: SolutionClass, gap: float, ctx: HardnessContext) -> _Profile:
    config = ctx.config
    if solution_class == SolutionClass.SAFE_SUBOPTIMAL:
        x = gap
        step = ctx.sigma_bar_sq / (3.0 * math.sqrt(ctx.log_inverse(config.omega_v)))
        omega, coefficient = ctx.omega_mu_v, 4.0
    elif solution_class == SolutionClass.RISKY:
        x = gap / (3.0 * math.sqrt(ctx.log_inverse(config.omega_v_prime)))
        step = ctx.sigma_bar_sq / (3.0 * ctx.omega_sum)
        omega, coefficient = ctx.omega_v_v_prime, 3.0
    elif solution_class == SolutionClass.UNSAFE_SUBOPTIMAL:
        x = gap
        step = ctx.sigma_bar_sq / (3.0 * ctx.omega_sum)
        omega, coefficient = ctx.omega_max, 3.0
    else:
        raise ValueError(f"no per-item profile for class {solution_class.value}")
    log_omega = ctx.log_inverse(omega)
    bracket = 2.0 + (ln_ln_plus(1.0 / (log_omega * x * x)) + ctx.constants.D) / log_omega
    return _Profile(x=x, step=step, bracket=bracket, coefficient=coefficient)


def _optimal_log_term(gap: float, ctx: HardnessContext) -> float:
    return (
        2.0 * ctx.log_inverse(ctx.config.omega_v)
        + ln_ln_plus(1.0 / (gap * gap))
        + ctx.constants.D
    )


def g_eval(
    solution_class: SolutionClass, r: int, gap: Optional[float], ctx: HardnessContext
) -> Optional[float]:
    """Bound on the phases of ``solution_class`` needing more than ``r`` sub-solutions.

    Returns ``None`` when ``gap`` is undefined.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if gap is None:
        return None
    if gap <= 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    scale = ctx.constants.scale
    if solution_class == SolutionClass.OPTIMAL:
        return (
            9.0
            * scale
            / ((r - 1) * ctx.sigma_bar_sq + gap) ** 2
            * _optimal_log_term(gap, ctx)
        )
    profile = _profile(solution_class, gap, ctx)
    if r >= profile.changing_point + 2:
        return scale * profile.bracket / ((r - 1) * profile.step) ** 2
    return scale * profile.bracket / profile.x**2


@dataclass(frozen=True)
class HEvaluation:
    value: float
    branch: str
    boundary: bool
    closed_form: float
    exact_sum: float


def _closed_form(
    solution_class: SolutionClass, r_prime: int, gap: float, ctx: HardnessContext
) -> Tuple[float, str, bool]:
    Q = ctx.Q
    scale = ctx.constants.scale
    if r_prime >= Q:
        return 0.0, "zero", False
    if solution_class == SolutionClass.OPTIMAL:
        log_term = _optimal_log_term(gap, ctx)
        if r_prime >= 2:
            return 18.0 * scale / ((r_prime - 1) * ctx.sigma_bar_sq**2) * log_term, "tail", False
        return 18.0 * scale / (gap * gap) * log_term, "head", False

    profile = _profile(solution_class, gap, ctx)
    f, x, step, bracket = profile.changing_point, profile.x, profile.step, profile.bracket
    candidates = []
    if f >= Q - 3:
        candidates.append(((Q - r_prime) * scale * bracket / x**2, "flat"))
    if f + 2 <= r_prime < Q - 1:
        candidates.append((2.0 * scale * bracket / ((r_prime - 1) * step**2), "tail"))
    if f == 0 and r_prime == 1:
        candidates.append((3.0 * scale * bracket / x**2, "head"))
    if not candidates:
        value = scale * (profile.coefficient / (step * x) - (r_prime - 1) / x**2) * bracket
        return value, "mixed", False
    value, branch = min(candidates)
    return value, branch, len(candidates) > 1


def h_eval(
    solution_class: SolutionClass, r_prime: int, gap: Optional[float], ctx: HardnessContext
) -> Optional[HEvaluation]:
    """Upper bound on the sum of g over r = r', ..., Q-1.

    The closed-form branch (the smallest applicable one at overlapping
    boundaries) is raised to the exact partial sum when it falls below it,
    and to the values at larger r', so the result never increases in r'.
    """
    if not 1 <= r_prime <= ctx.Q:
        raise ValueError(f"r' must be in [1, {ctx.Q}], got {r_prime}")
    if gap is None:
        return None

    envelope = 0.0
    exact = 0.0
    result = None
    for current in range(ctx.Q, r_prime - 1, -1):
        if current < ctx.Q:
            exact += g_eval(solution_class, current, gap, ctx)
        closed, branch, boundary = _closed_form(solution_class, current, gap, ctx)
        envelope = max(envelope, closed, exact)
        result = HEvaluation(
            value=envelope,
            branch=branch,
            boundary=boundary,
            closed_form=closed,
            exact_sum=exact,
        )
    return result


# ---------------------------------------------------------------------------
# Instance-level evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositeGaps:
    """Per-item gaps fed to the g and h functions, ``None`` where undefined."""

    variance_gap_star: float
    safe_suboptimal: Tuple[Optional[float], ...]
    risky: Tuple[Optional[float], ...]
    unsafe_suboptimal: Tuple[Optional[float], ...]

    def for_class(self, solution_class: SolutionClass) -> Tuple[Optional[float], ...]:
        return {
            SolutionClass.SAFE_SUBOPTIMAL: self.safe_suboptimal,
            SolutionClass.RISKY: self.risky,
            SolutionClass.UNSAFE_SUBOPTIMAL: self.unsafe_suboptimal,
        }[solution_class]


def _min_over_class(instance, partition, solution_class, value) -> Tuple[Optional[float], ...]:
    members = [idx for idx, label in enumerate(partition.labels) if label == solution_class]
    out = []
    for i in range(instance.L):
        values = [value(idx) for idx in members if i in instance.solutions[idx]]
        out.append(min(values) if values else None)
    return tuple(out)


def composite_gaps(
    instance: Instance, gaps: GapTable, partition: SafetyPartition, config: LilConfig
) -> CompositeGaps:
    root_mu = math.sqrt(math.log(1.0 / config.omega_mu))
    root_v = math.sqrt(math.log(1.0 / config.omega_v))
    root_v_prime = math.sqrt(math.log(1.0 / config.omega_v_prime))
    mean_gaps, variance_gaps = gaps.mean_gaps, gaps.variance_gaps
    return CompositeGaps(
        variance_gap_star=gaps.variance_gap_star,
        safe_suboptimal=_min_over_class(
            instance,
            partition,
            SolutionClass.SAFE_SUBOPTIMAL,
            lambda idx: max(mean_gaps[idx] / root_mu, variance_gaps[idx] / (3.0 * root_v)),
        ),
        risky=gaps.risky_variance_gap,
        unsafe_suboptimal=_min_over_class(
            instance,
            partition,
            SolutionClass.UNSAFE_SUBOPTIMAL,
            lambda idx: max(
                mean_gaps[idx] / root_mu, variance_gaps[idx] / (3.0 * root_v_prime)
            ),
        ),
    )


@dataclass(frozen=True)
class RegretBounds:
    reg1: float
    reg2: float
    reg3: float
    naive: float
    total: float
    independent_sqrt_term: float
    independent_log_term: float

    @property
    def problem_independent(self) -> float:
        """Shape only: both terms carry unit constants."""
        return self.independent_sqrt_term + self.independent_log_term


@dataclass
class HardnessReport:
    instance_name: str
    horizon: int
    delta: float
    config: LilConfig
    constants: HardnessConstants
    q: int
    Q: int
    mu_star: float
    composite: CompositeGaps
    thresholds: Dict[int, float]
    hardness: Dict[int, float]
    contributions: Dict[str, List[Optional[float]]]
    boundaries: List[str]
    bounds: RegretBounds
    asymptotic_hardness: float
    undefined: List[str] = field(default_factory=list)

    def to_document(self) -> dict:
        """JSON-shaped key tree of the report."""
        return {
            "instance": self.instance_name,
            "horizon": self.horizon,
            "delta": self.delta,
            "omegas": {
                "omega_mu": self.config.omega_mu,
                "omega_v": self.config.omega_v,
                "omega_v_prime": self.config.omega_v_prime,
                "epsilon": self.config.epsilon,
            },
            "constants": {
                "C": self.constants.C,
                "gamma": self.constants.gamma,
                "D": self.constants.D,
                "K": self.constants.K,
            },
            "q": self.q,
            "Q": self.Q,
            "mu_star": self.mu_star,
            "gaps": {
                "variance_gap_star": self.composite.variance_gap_star,
                "safe_suboptimal": list(self.composite.safe_suboptimal),
                "risky": list(self.composite.risky),
                "unsafe_suboptimal": list(self.composite.unsafe_suboptimal),
            },
            "thresholds": {str(r): value for r, value in self.thresholds.items()},
            "hardness": {str(r): value for r, value in self.hardness.items()},
            "h_at_1": self.contributions,
            "boundaries": self.boundaries,
            "undefined": self.undefined,
            "bounds": {
                "reg1": self.bounds.reg1,
                "reg2": self.bounds.reg2,
                "reg3": self.bounds.reg3,
                "naive": self.bounds.naive,
                "total": self.bounds.total,
                "problem_independent": {
                    "sqrt_term": self.bounds.independent_sqrt_term,
                    "log_term": self.bounds.independent_log_term,
                    "total": self.bounds.problem_independent,
                    "note": "shape only, unit constants",
                },
            },
            "asymptotic_hardness": self.asymptotic_hardness,
        }


def _class_terms(
    solution_class: SolutionClass, composite: CompositeGaps, partition: SafetyPartition
) -> List[Tuple[int, Optional[float]]]:
    if solution_class == SolutionClass.OPTIMAL:
        return [(i, composite.variance_gap_star) for i in partition.optimal_safe]
    return list(enumerate(composite.for_class(solution_class)))


def _suboptimality_regret(
    instance: Instance,
    gaps: GapTable,
    partition: SafetyPartition,
    ctx: HardnessContext,
) -> float:
    config = ctx.config
    scale = ctx.constants.scale
    D = ctx.constants.D
    log_mu = math.log(1.0 / config.omega_mu)
    log_v_prime = math.log(1.0 / config.omega_v_prime)
    omega_bar = math.sqrt(log_v_prime / log_mu)

    total = 0.0
    for gap in gaps.safe_suboptimal_min:
        if gap is None:
            continue
        total += 2.0 * scale / gap * (2.0 * log_mu + ln_ln_plus(1.0 / gap**2) + D)

    unsafe = [
        idx for idx, label in enumerate(partition.labels)
        if label == SolutionClass.UNSAFE_SUBOPTIMAL
    ]
    for i, gap in enumerate(gaps.unsafe_suboptimal_min):
        if gap is None:
            continue
        containing = [idx for idx in unsafe if i in instance.solutions[idx]]
        scaled = [
            max(omega_bar * gaps.mean_gaps[idx], gaps.variance_gaps[idx] / 3.0)
            for idx in containing
        ]
        tension = max(
            (gaps.mean_gaps[idx] / value) ** 2 for idx, value in zip(containing, scaled)
        )
        scaled_gap = min(scaled)
        total += (
            2.0 * tension * scale / gap
            * (2.0 * log_v_prime + ln_ln_plus(1.0 / scaled_gap**2) + D)
        )
    return total


def _asymptotic_hardness(
    instance: Instance, gaps: GapTable, partition: SafetyPartition
) -> float:
    """Dominant-term form of H(1) for delta_T = T^-lambda, unit constants."""
    log_T = math.log(gaps.horizon)
    lam = math.log(1.0 / gaps.delta) / log_T
    K = instance.K
    total = (lam + 1.0) * K * K * log_T / gaps.variance_gap_star**2
    safe_sub = [
        idx for idx, label in enumerate(partition.labels)
        if label == SolutionClass.SAFE_SUBOPTIMAL
    ]
    for i in range(instance.L):
        item_total = 0.0
        if gaps.risky_variance_gap[i] is not None:
            item_total += log_T / gaps.risky_variance_gap[i] ** 2
        values = [
            min(
                log_T / gaps.mean_gaps[idx] ** 2,
                (lam + 1.0) * log_T / gaps.variance_gaps[idx] ** 2,
            )
            for idx in safe_sub
            if i in instance.solutions[idx]
        ]
        if values:
            item_total += max(values)
        if gaps.phi[i] is not None:
            item_total += gaps.phi[i]
        total += K * item_total
    return total


def hardness_report(
    instance: Instance,
    T: int,
    delta_T: float,
    epsilon: float = settings.EPSILON,
    config: Optional[LilConfig] = None,
) -> HardnessReport:
    """Evaluate T'_r, H(r', instance) and the regret bounds of ``instance``."""
    config = config or LilConfig.from_horizon(T, delta_T, epsilon)
    partition = classify(instance)
    gaps = compute_gaps(instance, T, delta_T, partition)
    ctx = HardnessContext.for_instance(instance, config)
    composite = composite_gaps(instance, gaps, partition, config)
    q, Q = absolutely_safe_threshold(instance)

    classes = (SolutionClass.OPTIMAL,) + PER_ITEM_CLASSES
    thresholds: Dict[int, float] = {0: math.inf}
    for r in range(1, Q):
        total = 0.0
        for solution_class in classes:
            for _, gap in _class_terms(solution_class, composite, partition):
                value = g_eval(solution_class, r, gap, ctx)
                if value is not None:
                    total += value
        thresholds[r] = total
    thresholds[Q] = 0.0

    hardness: Dict[int, float] = {}
    boundaries: List[str] = []
    contributions: Dict[str, List[Optional[float]]] = {
        c.value: [None] * instance.L for c in classes
    }
    for r_prime in range(1, Q + 1):
        total = 0.0
        for solution_class in classes:
            for i, gap in _class_terms(solution_class, composite, partition):
                evaluation = h_eval(solution_class, r_prime, gap, ctx)
                if evaluation is None:
                    continue
                total += evaluation.value
                if r_prime == 1:
                    contributions[solution_class.value][i] = evaluation.value
                if evaluation.boundary:
                    boundaries.append(f"{solution_class.value}[item {i + 1}] at r'={r_prime}")
        hardness[r_prime] = total
    for entry in boundaries:
        logger.warning(f"{instance.name}: overlapping h branches for {entry}, kept the minimum")

    mu_star = partition.mu_star
    reg1 = _suboptimality_regret(instance, gaps, partition, ctx)
    reg2 = 2.0 * mu_star * hardness[1]
    reg3 = (
        2.0
        * mu_star
        * instance.L
        * (
            1.0
            + T
            * (
                xi(config.omega_mu, config.epsilon)
                + 2.0 * xi(config.omega_v, config.epsilon)
                + 2.0 * xi(config.omega_v_prime, config.epsilon)
            )
        )
    )
    naive = T * mu_star
    min_variance_gap = float(gaps.variance_gaps.min())
    bounds = RegretBounds(
        reg1=reg1,
        reg2=reg2,
        reg3=reg3,
        naive=naive,
        total=min(naive, reg1 + reg2) + reg3,
        independent_sqrt_term=math.sqrt(instance.K * instance.L * T * math.log(T)),
        independent_log_term=instance.L
        * instance.K**2
        / min_variance_gap**2
        * math.log(1.0 / delta_T),
    )

    return HardnessReport(
        instance_name=instance.name,
        horizon=T,
        delta=delta_T,
        config=config,
        constants=ctx.constants,
        q=q,
        Q=Q,
        mu_star=mu_star,
        composite=composite,
        thresholds=thresholds,
        hardness=hardness,
        contributions=contributions,
        boundaries=boundaries,
        bounds=bounds,
        asymptotic_hardness=_asymptotic_hardness(instance, gaps, partition),
        undefined=gaps.undefined_entries(),
    )


def hardness_H(
    r_prime: int,
    instance: Instance,
    T: int,
    delta_T: float,
    epsilon: float = settings.EPSILON,
) -> float:
    report = hardness_report(instance, T, delta_T, epsilon)
    if r_prime not in report.hardness:
        raise ValueError(f"r' must be in [1, {report.Q}], got {r_prime}")
    return report.hardness[r_prime]


def regret_bounds(
    instance: Instance,
    T: int,
    delta_T: float,
    epsilon: float = settings.EPSILON,
) -> RegretBounds:
    return hardness_report(instance, T, delta_T, epsilon).bounds
