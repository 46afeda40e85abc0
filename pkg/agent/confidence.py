"""Running item statistics and law-of-iterated-logarithm confidence bounds.

Every item keeps its pull count and compensated sums of rewards and squared
rewards. From those, the mean radius alpha and the asymmetric variance radii
beta_u / beta_l give upper and lower confidence bounds on each item's mean and
variance; variance bounds are clipped to [0, sigma_sq].
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from agent import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LilConfig:
    """Confidence parameters of one run."""

    omega_mu: float
    omega_v: float
    omega_v_prime: float
    epsilon: float = settings.EPSILON

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        for name in ("omega_mu", "omega_v", "omega_v_prime"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {value}")

    @classmethod
    def from_horizon(
        cls,
        T: int,
        delta: float,
        epsilon: float = settings.EPSILON,
        omega_mu: Optional[float] = None,
        omega_v: Optional[float] = None,
        omega_v_prime: Optional[float] = None,
    ) -> "LilConfig":
        """Default schedule for ``(T, delta)`` with optional per-parameter overrides."""
        default_mu, default_v, default_v_prime = default_omegas(T, delta)
        return cls(
            omega_mu=default_mu if omega_mu is None else omega_mu,
            omega_v=default_v if omega_v is None else omega_v,
            omega_v_prime=default_v_prime if omega_v_prime is None else omega_v_prime,
            epsilon=epsilon,
        )


def default_omegas(T: int, delta_T: float) -> Tuple[float, float, float]:
    """Return ``(omega_mu, omega_v, omega_v_prime) = (1/T^2, delta_T/T^2, 1/T^2)``."""
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    if not 0.0 < delta_T < 1.0:
        raise ValueError(f"delta_T must be in (0, 1), got {delta_T}")
    base = 1.0 / (float(T) * float(T))
    return base, delta_T * base, base


def lil(t: int, rho: float, epsilon: float = settings.EPSILON) -> float:
    """LIL confidence radius after ``t`` samples at confidence ``rho``.

    Returns ``inf`` when ln((1+eps)t)/rho < 1, where the radius is vacuous.
    """
    if t < 1:
        raise ValueError(f"lil needs t >= 1, got {t}")
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    return _lil(int(t), float(rho), float(epsilon))


@lru_cache(maxsize=1 << 18)
def _lil(t: int, rho: float, epsilon: float) -> float:
    inner = math.log((1.0 + epsilon) * t) / rho
    if inner < 1.0:
        return math.inf
    return (1.0 + math.sqrt(epsilon)) * math.sqrt(
        (1.0 + epsilon) / (2.0 * t) * math.log(inner)
    )


def radii(t: int, config: LilConfig) -> Tuple[float, float, float]:
    """Return ``(alpha, beta_u, beta_l)`` after ``t`` pulls."""
    return (
        lil(t, config.omega_mu, config.epsilon),
        3.0 * lil(t, config.omega_v, config.epsilon),
        3.0 * lil(t, config.omega_v_prime, config.epsilon),
    )


def xi(omega: float, epsilon: float = settings.EPSILON) -> float:
    """Failure probability of the LIL bound at confidence ``omega``."""
    if omega < 0.0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    return (2.0 + epsilon) / epsilon * (omega / math.log(1.0 + epsilon)) ** (1.0 + epsilon)


def lil_gamma(epsilon: float = settings.EPSILON) -> float:
    return (1.0 + epsilon) * (1.0 + math.sqrt(epsilon)) ** 2 / 2.0


def ln_ln_plus(y: float) -> float:
    """ln ln y for y >= e, else 0."""
    return math.log(math.log(y)) if y >= math.e else 0.0


def lil_inversion_m(x: float, omega: float, u: float, epsilon: float = settings.EPSILON) -> float:
    """Sample count beyond which ``u * x > lil(t, omega)`` holds for every ``t``."""
    if x <= 0.0 or u <= 0.0:
        raise ValueError(f"x and u must be positive, got x={x}, u={u}")
    gamma = lil_gamma(epsilon)
    return (
        gamma
        / (u * u * x * x)
        * (
            2.0 * math.log(1.0 / omega)
            + ln_ln_plus(1.0 / (x * x))
            + math.log(2.0 * gamma * (1.0 + epsilon) / (u * u))
        )
    )


# ---------------------------------------------------------------------------
# Item statistics
# ---------------------------------------------------------------------------


def _neumaier(total: float, compensation: float, value: float) -> Tuple[float, float]:
    new_total = total + value
    if abs(total) >= abs(value):
        compensation += (total - new_total) + value
    else:
        compensation += (value - new_total) + total
    return new_total, compensation


@dataclass(frozen=True)
class ItemStats:
    pulls: int = 0
    reward_sum: float = 0.0
    reward_compensation: float = 0.0
    square_sum: float = 0.0
    square_compensation: float = 0.0

    @property
    def total(self) -> float:
        return self.reward_sum + self.reward_compensation

    @property
    def total_square(self) -> float:
        return self.square_sum + self.square_compensation

    @property
    def mean(self) -> float:
        if self.pulls == 0:
            raise ValueError("sample mean undefined before the first pull")
        return self.total / self.pulls

    @property
    def variance(self) -> float:
        """Population sample variance, never below zero."""
        mean = self.mean
        return max(self.total_square / self.pulls - mean * mean, 0.0)


def update(stats: ItemStats, reward: float) -> ItemStats:
    reward = float(reward)
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward must be in [0, 1], got {reward}")
    reward_sum, reward_compensation = _neumaier(
        stats.reward_sum, stats.reward_compensation, reward
    )
    square_sum, square_compensation = _neumaier(
        stats.square_sum, stats.square_compensation, reward * reward
    )
    return ItemStats(
        pulls=stats.pulls + 1,
        reward_sum=reward_sum,
        reward_compensation=reward_compensation,
        square_sum=square_sum,
        square_compensation=square_compensation,
    )


@dataclass(frozen=True)
class ItemBounds:
    mean: float
    variance: float
    U_mu: float
    L_mu: float
    U_var: float
    L_var: float


def item_bounds(
    stats: ItemStats, config: LilConfig, sigma_sq: float = settings.SIGMA_SQ
) -> ItemBounds:
    if stats.pulls == 0:
        raise ValueError("confidence bounds are undefined before the first pull")
    alpha, beta_u, beta_l = radii(stats.pulls, config)
    mean, variance = stats.mean, stats.variance
    return ItemBounds(
        mean=mean,
        variance=variance,
        U_mu=mean + alpha,
        L_mu=mean - alpha,
        U_var=min(variance + beta_u, sigma_sq),
        L_var=max(variance - beta_l, 0.0),
    )


@dataclass(frozen=True)
class SolutionBounds:
    U_mu: float
    L_mu: float
    U_var: float
    L_var: float
    mean: float
    variance: float


def solution_bounds(
    all_item_bounds: Sequence[Optional[ItemBounds]], solution: Iterable[int]
) -> SolutionBounds:
    """Sum item bounds over ``solution``; every item must have been pulled."""
    chosen = []
    for i in solution:
        bounds = all_item_bounds[i]
        if bounds is None:
            raise ValueError(f"item {i + 1} has not been pulled yet")
        chosen.append(bounds)
    return SolutionBounds(
        U_mu=math.fsum(b.U_mu for b in chosen),
        L_mu=math.fsum(b.L_mu for b in chosen),
        U_var=math.fsum(b.U_var for b in chosen),
        L_var=math.fsum(b.L_var for b in chosen),
        mean=math.fsum(b.mean for b in chosen),
        variance=math.fsum(b.variance for b in chosen),
    )


@dataclass(frozen=True)
class BoundsTable:
    """Item bounds as arrays; unpulled items carry vacuous bounds."""

    pulls: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    U_mu: np.ndarray
    L_mu: np.ndarray
    U_var: np.ndarray
    L_var: np.ndarray

    @classmethod
    def from_arrays(cls, **arrays) -> "BoundsTable":
        return cls(**{name: np.asarray(values, dtype=float) for name, values in arrays.items()})


class ConfidenceState:
    """Per-item statistics of a single run and the bounds derived from them.

    Usage:
        state = ConfidenceState(instance.L, config, instance.sigma_sq)
        state.observe(items, rewards)
        table = state.bounds_table()
    """

    def __init__(self, L: int, config: LilConfig, sigma_sq: float = settings.SIGMA_SQ):
        self.config = config
        self.sigma_sq = sigma_sq
        self.items: List[ItemStats] = [ItemStats() for _ in range(L)]

    @property
    def pulls(self) -> np.ndarray:
        return np.array([stats.pulls for stats in self.items], dtype=int)

    def observe(self, items: Sequence[int], rewards: Sequence[float]) -> None:
        for i, reward in zip(items, rewards):
            self.items[i] = update(self.items[i], reward)

    def item_bounds(self, i: int) -> Optional[ItemBounds]:
        stats = self.items[i]
        if stats.pulls == 0:
            return None
        return item_bounds(stats, self.config, self.sigma_sq)

    def bounds_table(self) -> BoundsTable:
        rows = {key: [] for key in ("pulls", "mean", "variance", "U_mu", "L_mu", "U_var", "L_var")}
        for i, stats in enumerate(self.items):
            bounds = self.item_bounds(i)
            rows["pulls"].append(stats.pulls)
            if bounds is None:
                values = (math.nan, math.nan, math.inf, -math.inf, self.sigma_sq, 0.0)
            else:
                values = (
                    bounds.mean,
                    bounds.variance,
                    bounds.U_mu,
                    bounds.L_mu,
                    bounds.U_var,
                    bounds.L_var,
                )
            for key, value in zip(("mean", "variance", "U_mu", "L_mu", "U_var", "L_var"), values):
                rows[key].append(value)
        return BoundsTable.from_arrays(**rows)

    def good_event(self, means: Sequence[float], variances: Sequence[float]) -> bool:
        """Whether every pulled item's true moments lie within its radii."""
        for stats, mean, variance in zip(self.items, means, variances):
            if stats.pulls == 0:
                continue
            alpha, beta_u, beta_l = radii(stats.pulls, self.config)
            if abs(stats.mean - mean) > alpha:
                return False
            if abs(stats.variance - variance) > min(beta_u, beta_l):
                return False
        return True
