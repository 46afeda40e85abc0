"""Derived series and tables: additional regret, safety statistics, fits and CSV frames."""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from agent import settings
from agent.trace import Trace
from instance.model import format_solution
from lab.presets import EXP3_GRID, experiment_preset, exp3_variance_gaps
from lab.simulate import Aggregate, RunConfig, monte_carlo
from utils.io_helpers import AGGREGATE_COLUMNS, TRACE_COLUMNS

logger = logging.getLogger(__name__)

CURVE_COLUMNS = (
    "t",
    "mean_regret",
    "se_regret",
    "mean_realized_regret",
    "se_realized_regret",
    "mean_reward",
    "se_reward",
    "violation_fraction",
    "mean_unsafe_count",
)


class CheckpointMismatchError(ValueError):
    """Two aggregates were sampled on different checkpoint grids."""


# ---------------------------------------------------------------------------
# Derived series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdditionalRegret:
    label: str
    checkpoints: np.ndarray
    mean: np.ndarray
    se: np.ndarray

    @property
    def final(self) -> float:
        return float(self.mean[-1])


def additional_regret(pascomb: Aggregate, baseline: Aggregate) -> AdditionalRegret:
    """Pointwise difference of mean cumulative regrets, independent standard errors combined."""
    if not np.array_equal(pascomb.checkpoints, baseline.checkpoints):
        raise CheckpointMismatchError(
            f"{pascomb.label} and {baseline.label} use different checkpoint grids"
        )
    return AdditionalRegret(
        label=f"{pascomb.label}-{baseline.label}",
        checkpoints=pascomb.checkpoints,
        mean=pascomb.mean_regret - baseline.mean_regret,
        se=np.sqrt(pascomb.se_regret**2 + baseline.se_regret**2),
    )


@dataclass(frozen=True)
class SafetyStats:
    per_step_violation_fraction: float
    any_violation: float
    any_violation_se: float = 0.0


def safety_stats(result: Union[Trace, Aggregate]) -> SafetyStats:
    """Violation counts of one trace, or their means over an aggregate.

    ``any_violation`` is the run-level indicator for a trace and the rate of
    runs with at least one unsafe pull for an aggregate.
    """
    if isinstance(result, Trace):
        unsafe = result.unsafe
        return SafetyStats(
            per_step_violation_fraction=float(unsafe.mean()),
            any_violation=float(unsafe.any()),
        )
    return SafetyStats(
        per_step_violation_fraction=float(result.mean_unsafe_count[-1]) / result.horizon,
        any_violation=result.any_violation_rate,
        any_violation_se=result.any_violation_se,
    )


def tail_violation_fraction(aggregate: Aggregate, start_fraction: float = 0.5) -> float:
    """Mean fraction of unsafe pulls after ``start_fraction * T``."""
    if not 0.0 <= start_fraction < 1.0:
        raise ValueError(f"start_fraction must be in [0, 1), got {start_fraction}")
    checkpoints = aggregate.checkpoints
    position = int(np.searchsorted(checkpoints, start_fraction * aggregate.horizon))
    start = int(checkpoints[position])
    if start >= aggregate.horizon:
        return float(aggregate.violation_fraction[-1])
    counted = aggregate.mean_unsafe_count[-1] - aggregate.mean_unsafe_count[position]
    return float(counted) / (aggregate.horizon - start)


def plateau_ratio(checkpoints: Sequence[int], values: Sequence[float]) -> float:
    """Slope over the last quarter of the horizon divided by the slope over the first.

    The series is linearly interpolated between checkpoints and starts at 0.
    Returns ``nan`` when the first-quarter slope is not positive.
    """
    t = np.concatenate([[0.0], np.asarray(checkpoints, dtype=float)])
    y = np.concatenate([[0.0], np.asarray(values, dtype=float)])
    T = t[-1]

    def at(x: float) -> float:
        return float(np.interp(x, t, y))

    first = (at(T / 4.0) - at(0.0)) / (T / 4.0)
    last = (at(T) - at(3.0 * T / 4.0)) / (T / 4.0)
    if first <= 0.0:
        return math.nan
    return last / first


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    p_value: float
    stderr: float

    def to_document(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "p_value": self.p_value,
            "stderr": self.stderr,
        }


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least squares of ``y`` on ``x``."""
    result = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return LinearFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue**2),
        p_value=float(result.pvalue),
        stderr=float(result.stderr),
    )


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def trace_frame(trace: Trace) -> pd.DataFrame:
    """One row per time step, columns in ``TRACE_COLUMNS`` order."""
    labels = [format_solution(s, style="label") for s in trace.solutions]
    return pd.DataFrame(
        {
            "run_id": np.full(trace.horizon, trace.run_index, dtype=int),
            "t": np.arange(1, trace.horizon + 1),
            "phase": trace.phase,
            "subsolution": [labels[idx] for idx in trace.solution_index],
            "reward": trace.reward,
            "pseudo_regret_cum": trace.pseudo_regret,
            "realized_regret_cum": trace.realized_regret,
            "unsafe": trace.unsafe.astype(int),
        },
        columns=list(TRACE_COLUMNS),
    )


def traces_frame(traces: Sequence[Trace]) -> pd.DataFrame:
    return pd.concat([trace_frame(trace) for trace in traces], ignore_index=True)


def aggregate_frame(aggregate: Aggregate, realized: bool = False) -> pd.DataFrame:
    """The aggregate CSV table; ``realized`` swaps in the realized-regret curve."""
    mean = aggregate.mean_realized_regret if realized else aggregate.mean_regret
    se = aggregate.se_realized_regret if realized else aggregate.se_regret
    return pd.DataFrame(
        {
            "t": aggregate.checkpoints,
            "mean_regret": mean,
            "se_regret": se,
            "violation_fraction": aggregate.violation_fraction,
        },
        columns=list(AGGREGATE_COLUMNS),
    )


def curves_frame(aggregate: Aggregate) -> pd.DataFrame:
    """Every checkpoint curve of the aggregate, for plotting."""
    return pd.DataFrame(
        {
            "t": aggregate.checkpoints,
            "mean_regret": aggregate.mean_regret,
            "se_regret": aggregate.se_regret,
            "mean_realized_regret": aggregate.mean_realized_regret,
            "se_realized_regret": aggregate.se_realized_regret,
            "mean_reward": aggregate.mean_reward,
            "se_reward": aggregate.se_reward,
            "violation_fraction": aggregate.violation_fraction,
            "mean_unsafe_count": aggregate.mean_unsafe_count,
        },
        columns=list(CURVE_COLUMNS),
    )


def additional_frame(series: AdditionalRegret) -> pd.DataFrame:
    return pd.DataFrame(
        {"t": series.checkpoints, "mean_additional_regret": series.mean, "se": series.se}
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    experiment_id: int
    aggregates: Dict[str, Aggregate]
    additional: Dict[str, AdditionalRegret] = field(default_factory=dict)
    fit: Optional[LinearFit] = None
    fit_points: List[dict] = field(default_factory=list)
    plateau: Dict[str, float] = field(default_factory=dict)
    tail_violations: Dict[str, float] = field(default_factory=dict)
    configs: List[dict] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "experiment": self.experiment_id,
            "configs": self.configs,
            "runs": {label: agg.summary() for label, agg in self.aggregates.items()},
            "additional_regret": {
                label: {"final": series.final, "final_se": float(series.se[-1])}
                for label, series in self.additional.items()
            },
            "plateau_ratio": self.plateau,
            "tail_violation_fraction": self.tail_violations,
            "fit": self.fit.to_document() if self.fit else None,
            "fit_points": self.fit_points,
        }


def run_experiment(
    experiment_id: int,
    seed: int,
    parallel: int = 1,
    horizon: Optional[int] = None,
    replications: int = settings.REPLICATIONS,
    configs: Optional[Sequence[RunConfig]] = None,
) -> ExperimentResult:
    """Run every config of a preset and derive its comparison series.

    Experiment 1 and 2 compare each PASCombUCB run with the CombUCB1 run;
    experiment 3 also fits the final additional regret against 1/gap^2 of
    the optimal safe solution's variance gap. Pass ``configs`` to run a preset
    that was already built with ``experiment_preset``.
    """
    if configs is None:
        configs = experiment_preset(experiment_id, horizon, replications, seed)
    aggregates = {}
    for config in configs:
        logger.info(f"experiment {experiment_id}: running {config.label}")
        aggregates[config.label] = monte_carlo(config, parallel=parallel)

    baseline_label = next(c.label for c in configs if c.algorithm == "combucb1")
    baseline = aggregates[baseline_label]
    result = ExperimentResult(
        experiment_id=experiment_id,
        aggregates=aggregates,
        configs=[config.echo() for config in configs],
    )
    for config in configs:
        if config.algorithm != "pascomb":
            continue
        series = additional_regret(aggregates[config.label], baseline)
        result.additional[config.label] = series
        result.plateau[config.label] = plateau_ratio(series.checkpoints, series.mean)
    for label, aggregate in aggregates.items():
        result.tail_violations[label] = tail_violation_fraction(aggregate)

    if experiment_id == 3:
        pascomb_labels = [c.label for c in configs if c.algorithm == "pascomb"]
        inverse_gaps = [1.0 / gap**2 for gap in exp3_variance_gaps()]
        finals = [result.additional[label].final for label in pascomb_labels]
        result.fit = linear_fit(inverse_gaps, finals)
        result.fit_points = [
            {"sigma_bar_sq": budget, "inverse_gap_sq": x, "additional_regret": y}
            for budget, x, y in zip(EXP3_GRID, inverse_gaps, finals)
        ]

    logger.info(json.dumps({"event": "experiment", **result.summary()}, indent=2, default=str))
    return result
