"""Command-line entry point for instance analysis, simulation, experiments and bounds.

Subcommands:
    analyze    --config F --out D
    simulate   --config F --out D --seed S [--parallel P] [--T n] [--delta d]
               [--algorithm a] [--sigma-bar-sq v] [--realized]
    experiment --id {1|2|3} --out D --seed S [--parallel P] [--T n] [--reps N]
               [--realized]
    bounds     --config F --T n --delta d --out D

Exit codes: 0 success, 2 config error, 3 runtime failure.
"""

import argparse
import json
import logging
import os
import re
import sys
from typing import List, Optional

import pandas as pd

# Add project root to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from agent import settings
from agent.confidence import LilConfig
from agent.engine import absolutely_safe_threshold
from analysis.hardness import hardness_report
from instance.model import InstanceError, classify, compute_gaps, format_solution
from lab.config import instance_from_mapping, load_run_config
from lab.presets import experiment_preset
from lab.reports import (
    additional_frame,
    aggregate_frame,
    curves_frame,
    run_experiment,
    traces_frame,
)
from lab.simulate import monte_carlo
from utils.io_helpers import (
    AGGREGATE_COLUMNS,
    TRACE_COLUMNS,
    ConfigError,
    ensure_dir,
    read_config,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

LOAD_ERRORS = (ConfigError, InstanceError, ValueError)


class _WarningCollector(logging.Handler):
    """Keeps the warnings logged while one command runs, for warnings.txt."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


def _count(text: str) -> int:
    """Parse counts written either as integers or as ``1e5``."""
    value = float(text)
    if not value.is_integer() or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return int(value)


def _file_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def analyze(args: argparse.Namespace) -> int:
    collector = _WarningCollector()
    logging.getLogger().addHandler(collector)
    try:
        try:
            data = read_config(args.config)
            instance = instance_from_mapping(data, source=args.config)
            T = int(float(data.get("T", 100_000)))
            delta = float(data.get("delta", settings.DELTA))
            partition = classify(instance)
            gaps = compute_gaps(instance, T, delta, partition)
        except LOAD_ERRORS as e:
            logger.error(f"analyze: {e}")
            return EXIT_CONFIG

        out = ensure_dir(args.out)
        q, Q = absolutely_safe_threshold(instance)
        write_json(
            {
                "instance": instance.name,
                "sigma_bar_sq": instance.sigma_bar_sq,
                "q": q,
                "Q": Q,
                "optimal_safe": format_solution(partition.optimal_safe),
                "mu_star": partition.mu_star,
                "safe_suboptimal": [format_solution(s) for s in partition.safe_suboptimal],
                "risky": [format_solution(s) for s in partition.risky],
                "unsafe_suboptimal": [format_solution(s) for s in partition.unsafe_suboptimal],
            },
            os.path.join(out, "partition.json"),
        )
        write_csv(
            pd.DataFrame(
                {
                    "solution": [format_solution(s) for s in instance.solutions],
                    "size": instance.sizes,
                    "mean": instance.solution_means,
                    "variance": instance.solution_variances,
                    "class": [label.value for label in partition.labels],
                    "mean_gap": gaps.mean_gaps,
                    "variance_gap": gaps.variance_gaps,
                }
            ),
            os.path.join(out, "gaps_solutions.csv"),
        )
        write_csv(
            pd.DataFrame(
                {
                    "item": range(1, instance.L + 1),
                    "safe_suboptimal_min": gaps.safe_suboptimal_min,
                    "unsafe_suboptimal_min": gaps.unsafe_suboptimal_min,
                    "tension": gaps.tension,
                    "risky_variance_gap": gaps.risky_variance_gap,
                    "psi": gaps.psi,
                    "psi_prime": gaps.psi_prime,
                    "phi": gaps.phi,
                }
            ),
            os.path.join(out, "gaps_items.csv"),
        )
        undefined = [f"undefined: {entry}" for entry in gaps.undefined_entries()]
        with open(os.path.join(out, "warnings.txt"), "w", encoding="utf-8") as file:
            for line in collector.messages + undefined:
                file.write(line + "\n")

        logger.info(
            json.dumps(
                {
                    "event": "analyze",
                    "instance": instance.name,
                    "optimal_safe": format_solution(partition.optimal_safe),
                    "mu_star": partition.mu_star,
                    "risky": len(partition.risky),
                    "warnings": len(collector.messages),
                    "undefined_gaps": len(undefined),
                },
                indent=2,
            )
        )
        return EXIT_OK
    finally:
        logging.getLogger().removeHandler(collector)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate(args: argparse.Namespace) -> int:
    try:
        config = load_run_config(
            args.config,
            T=args.T,
            delta=args.delta,
            algorithm=args.algorithm,
            sigma_bar_sq=args.sigma_bar_sq,
            seed=args.seed,
        )
    except LOAD_ERRORS as e:
        logger.error(f"simulate: {e}")
        return EXIT_CONFIG

    try:
        aggregate = monte_carlo(config, parallel=args.parallel, keep_traces=True)
        out = ensure_dir(args.out)
        write_csv(traces_frame(aggregate.traces), os.path.join(out, "trace.csv"), TRACE_COLUMNS)
        write_csv(
            aggregate_frame(aggregate, realized=args.realized),
            os.path.join(out, "aggregate.csv"),
            AGGREGATE_COLUMNS,
        )
        write_csv(curves_frame(aggregate), os.path.join(out, "curves.csv"))
        write_json(
            {"config": config.echo(), **aggregate.summary()},
            os.path.join(out, "summary.json"),
        )
    except Exception as e:
        logger.exception(f"simulate failed: {e}")
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def experiment(args: argparse.Namespace) -> int:
    try:
        configs = experiment_preset(args.id, args.T, args.reps, args.seed)
    except LOAD_ERRORS as e:
        logger.error(f"experiment: {e}")
        return EXIT_CONFIG

    try:
        result = run_experiment(args.id, seed=args.seed, parallel=args.parallel, configs=configs)
        out = ensure_dir(args.out)
        for label, aggregate in result.aggregates.items():
            name = _file_label(label)
            write_csv(
                aggregate_frame(aggregate, realized=args.realized),
                os.path.join(out, f"aggregate_{name}.csv"),
                AGGREGATE_COLUMNS,
            )
            write_csv(curves_frame(aggregate), os.path.join(out, f"curves_{name}.csv"))
        for label, series in result.additional.items():
            write_csv(additional_frame(series), os.path.join(out, f"additional_{_file_label(label)}.csv"))
        write_json(result.summary(), os.path.join(out, "summary.json"))
    except Exception as e:
        logger.exception(f"experiment {args.id} failed: {e}")
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def bounds(args: argparse.Namespace) -> int:
    try:
        data = read_config(args.config)
        instance = instance_from_mapping(data, source=args.config)
        config = LilConfig.from_horizon(
            args.T,
            args.delta,
            float(data.get("epsilon", settings.EPSILON)),
            omega_mu=data.get("omega_mu"),
            omega_v=data.get("omega_v"),
            omega_v_prime=data.get("omega_v_prime"),
        )
    except LOAD_ERRORS as e:
        logger.error(f"bounds: {e}")
        return EXIT_CONFIG

    try:
        report = hardness_report(instance, args.T, args.delta, config.epsilon, config)
        out = ensure_dir(args.out)
        write_json(report.to_document(), os.path.join(out, "hardness_report.json"))
        write_csv(
            pd.DataFrame(
                {
                    "r_prime": list(report.hardness),
                    "H": list(report.hardness.values()),
                    "T_prime_r": [report.thresholds[r] for r in report.hardness],
                }
            ),
            os.path.join(out, "hardness_H.csv"),
        )
        logger.info(
            json.dumps(
                {
                    "event": "bounds",
                    "instance": instance.name,
                    "Q": report.Q,
                    "H_at_1": report.hardness[1],
                    "reg1": report.bounds.reg1,
                    "reg2": report.bounds.reg2,
                    "reg3": report.bounds.reg3,
                    "total": report.bounds.total,
                },
                indent=2,
            )
        )
    except Exception as e:
        logger.exception(f"bounds failed: {e}")
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pascomb",
        description="Probably anytime-safe combinatorial semi-bandits: analysis and experiments.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("analyze", help="classify solutions and report gaps")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=analyze)

    p = commands.add_parser("simulate", help="replicate one algorithm on one instance")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--parallel", type=_count, default=1)
    p.add_argument("--T", type=_count)
    p.add_argument("--delta", type=float)
    p.add_argument("--algorithm", choices=["pascomb", "combucb1"])
    p.add_argument("--sigma-bar-sq", dest="sigma_bar_sq", type=float)
    p.add_argument("--realized", action="store_true", help="write realized instead of pseudo regret")
    p.set_defaults(handler=simulate)

    p = commands.add_parser("experiment", help="run experiment preset 1, 2 or 3")
    p.add_argument("--id", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--parallel", type=_count, default=1)
    p.add_argument("--T", type=_count)
    p.add_argument("--reps", type=_count, default=settings.REPLICATIONS)
    p.add_argument("--realized", action="store_true", help="write realized instead of pseudo regret")
    p.set_defaults(handler=experiment)

    p = commands.add_parser("bounds", help="evaluate hardness parameters and regret bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--T", type=_count, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=bounds)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    return args.handler(args)


if __name__ == "__main__":
    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    sys.exit(main())
