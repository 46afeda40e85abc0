"""Seeded Monte-Carlo experiments: configs, presets, replication pool and reports."""

from lab.config import (
    instance_from_mapping,
    load_instance,
    load_run_config,
    run_config_from_mapping,
)
from lab.presets import (
    EXP3_GRID,
    SET1_VARIANCES,
    SET2_VARIANCES,
    TABLE1_MEANS,
    experiment_preset,
    set_instance,
)
from lab.reports import (
    AdditionalRegret,
    CheckpointMismatchError,
    ExperimentResult,
    LinearFit,
    SafetyStats,
    additional_regret,
    aggregate_frame,
    curves_frame,
    linear_fit,
    plateau_ratio,
    run_experiment,
    safety_stats,
    tail_violation_fraction,
    trace_frame,
    traces_frame,
)
from lab.simulate import (
    Aggregate,
    RunConfig,
    RunSummary,
    checkpoint_grid,
    monte_carlo,
    simulate_run,
)
