"""Shared fixtures: the two Beta item sets, a small analysis-only instance and configs."""

import os

import pytest
from hypothesis import HealthCheck, settings

from instance.model import Instance, RewardModel, SolutionFamily
from lab.presets import set_instance

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(ROOT, "configs")


@pytest.fixture
def set1_constrained() -> Instance:
    """Set 1 at sigma_bar_sq=0.4: S* = {1,3,4} and {1,2,3} is risky."""
    return set_instance(1, 0.4)


@pytest.fixture
def set1_checked() -> Instance:
    return set_instance(1, 0.6)


@pytest.fixture
def set1_unconstrained() -> Instance:
    return set_instance(1, 0.751)


@pytest.fixture
def three_items() -> Instance:
    """Analysis-only instance with one risky pair and S* = {1,3}."""
    return Instance(
        item_means=(0.5, 0.4, 0.3),
        item_variances=(0.3, 0.2, 0.1),
        reward_models=RewardModel.NONE,
        K=2,
        family=SolutionFamily.all_subsets(2),
        sigma_bar_sq=0.45,
        name="three_items",
    )


@pytest.fixture
def point_mass_pair() -> Instance:
    """Two deterministic items, single-item family."""
    return Instance(
        item_means=(0.9, 0.1),
        item_variances=(0.0, 0.0),
        reward_models=RewardModel.POINT_MASS,
        K=1,
        family=SolutionFamily.all_subsets(1),
        sigma_bar_sq=0.3,
        name="point_mass_pair",
    )


@pytest.fixture
def config_path():
    def _path(name: str) -> str:
        return os.path.join(CONFIG_DIR, name)

    return _path
