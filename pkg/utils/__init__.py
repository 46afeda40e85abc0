"""File helpers for configs, reports and result tables."""

from utils.io_helpers import (
    AGGREGATE_COLUMNS,
    TRACE_COLUMNS,
    ConfigError,
    ensure_dir,
    read_aggregate_csv,
    read_config,
    read_json,
    read_trace_csv,
    write_csv,
    write_json,
)
