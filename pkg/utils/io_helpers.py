"""File helpers for configs, reports, traces and aggregates.

Config files are YAML or JSON; every emitted CSV or JSON document has a
reader here so reports can be reloaded by the library itself.
"""

import json
import logging
import os
from typing import Any, Dict, Optional, Sequence

import pandas as pd
import yaml

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "run_id",
    "t",
    "phase",
    "subsolution",
    "reward",
    "pseudo_regret_cum",
    "realized_regret_cum",
    "unsafe",
)
AGGREGATE_COLUMNS = ("t", "mean_regret", "se_regret", "violation_fraction")


class ConfigError(ValueError):
    """A config file that cannot be read or a key that fails validation."""

    def __init__(self, message: str, source: Optional[str] = None, key: Optional[str] = None):
        self.source = source
        self.key = key
        location = ":".join(part for part in (source, key) if part)
        super().__init__(f"{location}: {message}" if location else message)


# ---------------------------------------------------------------------------
# Configuration helpers
# ---------------------------------------------------------------------------


def read_config(file_path: str) -> Dict[str, Any]:
    """Read a configuration mapping from a JSON or YAML file."""
    if not os.path.exists(file_path):
        raise ConfigError("configuration file not found", source=file_path)

    _, ext = os.path.splitext(file_path.lower())

    try:
        with open(file_path, "r", encoding="utf-8") as file:
            if ext == ".json":
                data = json.load(file)
            elif ext in [".yaml", ".yml"]:
                data = yaml.safe_load(file)
            else:
                content = file.read()
                try:
                    data = json.loads(content)
                except json.JSONDecodeError:
                    data = yaml.safe_load(content)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse configuration: {e}", source=file_path) from e

    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", source=file_path)
    return data


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_json(document: Dict[str, Any], file_path: str) -> None:
    with open(file_path, "w", encoding="utf-8") as file:
        json.dump(document, file, indent=2, default=_json_default, allow_nan=True)
        file.write("\n")


def read_json(file_path: str) -> Dict[str, Any]:
    with open(file_path, "r", encoding="utf-8") as file:
        return json.load(file)


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    return str(value)


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def write_csv(frame: pd.DataFrame, file_path: str, columns: Optional[Sequence[str]] = None) -> None:
    if columns is not None:
        frame = frame.loc[:, list(columns)]
    frame.to_csv(file_path, index=False)


def _read_with_columns(file_path: str, columns: Sequence[str]) -> pd.DataFrame:
    frame = pd.read_csv(file_path)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"missing columns {missing}", source=file_path)
    return frame.loc[:, list(columns)]


def read_trace_csv(file_path: str) -> pd.DataFrame:
    frame = _read_with_columns(file_path, TRACE_COLUMNS)
    frame["subsolution"] = frame["subsolution"].astype(str)
    frame["unsafe"] = frame["unsafe"].astype(bool)
    return frame


def read_aggregate_csv(file_path: str) -> pd.DataFrame:
    return _read_with_columns(file_path, AGGREGATE_COLUMNS)
