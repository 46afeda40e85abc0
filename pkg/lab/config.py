"""Instance and run configs: one YAML/JSON schema for both.

Required keys: ``means``, ``variances``, ``K``, ``sigma_bar_sq``.
Optional instance keys: ``reward_model``, ``family``, ``paths``, ``members``,
``sigma_sq``, ``name``. Optional run keys: ``algorithm``, ``T``, ``delta``,
``epsilon``, ``omega_mu``, ``omega_v``, ``omega_v_prime``, ``replications``.

Item numbers in ``members`` are 1-based.
"""

import logging
from typing import Any, Dict, Mapping, Optional

from agent import settings
from instance.model import Instance, InstanceError, SolutionFamily
from lab.simulate import RunConfig
from utils.io_helpers import ConfigError, read_config

logger = logging.getLogger(__name__)

INSTANCE_KEYS = ("means", "variances", "K", "sigma_bar_sq")
OPTIONAL_KEYS = (
    "reward_model",
    "family",
    "paths",
    "members",
    "sigma_sq",
    "name",
    "algorithm",
    "T",
    "delta",
    "epsilon",
    "omega_mu",
    "omega_v",
    "omega_v_prime",
    "replications",
)
DEFAULT_HORIZON = 100_000


def _number(data: Mapping[str, Any], key: str, source: str, kind=float, default=None):
    if key not in data or data[key] is None:
        if default is None:
            raise ConfigError("missing required key", source=source, key=key)
        return default
    value = data[key]
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", source=source, key=key)
    try:
        converted = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"expected a number, got {value!r}", source=source, key=key) from e
    if kind is int:
        if not converted.is_integer():
            raise ConfigError(f"expected an integer, got {value!r}", source=source, key=key)
        return int(converted)
    return converted


def _number_list(data: Mapping[str, Any], key: str, source: str) -> list:
    if key not in data:
        raise ConfigError("missing required key", source=source, key=key)
    values = data[key]
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("expected a nonempty list of numbers", source=source, key=key)
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"non-numeric entry in {values!r}", source=source, key=key) from e


def _family(data: Mapping[str, Any], K: int, source: str) -> SolutionFamily:
    kind = str(data.get("family", "subsets")).lower()
    try:
        if kind == "subsets":
            return SolutionFamily.all_subsets(K)
        if kind == "kpath":
            if "paths" not in data:
                raise ConfigError("kpath family needs 'paths'", source=source, key="paths")
            return SolutionFamily.kpath([int(size) for size in data["paths"]])
        if kind == "explicit":
            if "members" not in data:
                raise ConfigError("explicit family needs 'members'", source=source, key="members")
            members = []
            for member in data["members"]:
                items = [int(i) for i in member]
                if any(i < 1 for i in items):
                    raise ConfigError(
                        f"item numbers are 1-based, got {items}", source=source, key="members"
                    )
                members.append([i - 1 for i in items])
            return SolutionFamily.explicit(members)
    except InstanceError as e:
        raise ConfigError(str(e), source=source, key="family") from e
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"malformed family: {e}", source=source, key="family") from e
    raise ConfigError(
        f"unknown family {kind!r}, expected subsets, kpath or explicit", source=source, key="family"
    )


def instance_from_mapping(
    data: Mapping[str, Any],
    source: str = "<config>",
    sigma_bar_sq: Optional[float] = None,
) -> Instance:
    """Build an ``Instance`` from a parsed config mapping.

    ``sigma_bar_sq`` overrides the file value when given.
    """
    unknown = sorted(set(data) - set(INSTANCE_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        logger.warning(f"{source}: ignoring unknown keys {unknown}")

    means = _number_list(data, "means", source)
    variances = _number_list(data, "variances", source)
    K = _number(data, "K", source, kind=int)
    budget = sigma_bar_sq if sigma_bar_sq is not None else _number(data, "sigma_bar_sq", source)
    family = _family(data, K, source)
    sigma_sq = _number(data, "sigma_sq", source, default=settings.SIGMA_SQ)

    try:
        return Instance(
            item_means=means,
            item_variances=variances,
            reward_models=data.get("reward_model", "beta"),
            K=K,
            family=family,
            sigma_bar_sq=budget,
            sigma_sq=sigma_sq,
            name=str(data.get("name", "instance")),
        )
    except InstanceError as e:
        raise ConfigError(str(e), source=source) from e
    except ValueError as e:
        raise ConfigError(f"invalid reward_model: {e}", source=source, key="reward_model") from e


def run_config_from_mapping(
    data: Mapping[str, Any],
    source: str = "<config>",
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Build a ``RunConfig``; non-None ``overrides`` win over file values.

    Override keys are the schema keys plus ``seed``.
    """
    merged: Dict[str, Any] = dict(data)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    instance = instance_from_mapping(
        {k: v for k, v in merged.items() if k != "seed"}, source=source
    )

    def optional(key: str) -> Optional[float]:
        return _number(merged, key, source) if merged.get(key) is not None else None

    try:
        return RunConfig(
            instance=instance,
            algorithm=str(merged.get("algorithm", "pascomb")),
            horizon=_number(merged, "T", source, kind=int, default=DEFAULT_HORIZON),
            delta=_number(merged, "delta", source, default=settings.DELTA),
            epsilon=_number(merged, "epsilon", source, default=settings.EPSILON),
            omega_mu=optional("omega_mu"),
            omega_v=optional("omega_v"),
            omega_v_prime=optional("omega_v_prime"),
            master_seed=_number(merged, "seed", source, kind=int, default=0),
            replications=_number(merged, "replications", source, kind=int, default=1),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), source=source) from e


def load_instance(file_path: str, sigma_bar_sq: Optional[float] = None) -> Instance:
    return instance_from_mapping(read_config(file_path), source=file_path, sigma_bar_sq=sigma_bar_sq)


def load_run_config(file_path: str, **overrides: Any) -> RunConfig:
    return run_config_from_mapping(read_config(file_path), source=file_path, overrides=overrides)
