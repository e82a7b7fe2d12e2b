"""
Command-Line Interface
Sub-commands: run, replicate, oracle, gen-fixture and cascade. Every command
stages its outputs and writes them only after it has fully succeeded.
"""

import argparse
import logging
import shutil
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from netrel.errors import ConfigError, ParseError, StateSpaceTooLargeError
from netrel.services.experiment import (
    Experiment,
    load_experiment,
    oracle_pf,
    resolve_path,
    resolve_true_pf,
)
from netrel.services.estimators import run_estimator
from netrel.services.power_flow import cascade, dump_cascade, load_case_file
from netrel.services.replication import most_shifted_states, replicate, sweep_configs
from netrel.services.report_writer import OutputBundle, render_json
from netrel.settings import Settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"
FIXTURES = {
    "ex511": ["ex511_linear.json", "ex511_bice.json"],
    "ex512": ["ex512_linear.json", "ex512_bice.json"],
    "ex52": ["ex52_network.txt", "ex52_bice.json"],
    "grid4": ["grid4_case.txt", "grid4_bice.json"],
    "grid3": ["grid3_case.txt"],
}

SUMMARY_FIELDS = [
    "method", "N", "b", "delta", "R", "true_pf", "mean_estimate", "rel_bias",
    "sample_cov", "mean_cost", "mcs_cov_same_cost", "fail_count",
]
RUN_FIELDS = ["method", "N", "b", "p_hat", "levels", "lsf_calls", "converged", "seed"]
PARAM_FIELDS = ["N", "b", "dimension", "state", "input_probability", "mean_probability"]


def output_dir(args, settings: Settings, experiment: Optional[Experiment] = None) -> Path:
    """--out-dir, then NETREL_OUT_DIR, then the config's output.directory, then the default."""
    if args.out_dir:
        return Path(args.out_dir)
    if settings.out_dir:
        return Path(settings.out_dir)
    if experiment is not None and experiment.config.output.directory:
        return resolve_path(experiment.base_dir, experiment.config.output.directory)
    return Path(settings.default_out_dir)


def _wants(experiment: Experiment, fmt: str) -> bool:
    return fmt in experiment.config.output.formats


def cmd_run(args, settings: Settings) -> int:
    experiment = load_experiment(args.config)
    config = experiment.config.estimator
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    report = run_estimator(experiment.lsf, experiment.input_model, config, is_model=experiment.importance_model)
    logger.info(
        f"{config.method}: p_hat={report.p_hat:.6g}, levels={report.levels}, "
        f"lsf_calls={report.lsf_calls}, converged={report.converged}"
    )

    bundle = OutputBundle()
    if _wants(experiment, "json"):
        bundle.add_json(f"{experiment.name}_report.json", report)
    if _wants(experiment, "csv"):
        bundle.add_csv(f"{experiment.name}_run.csv", [report.csv_row()], RUN_FIELDS)
    bundle.commit(output_dir(args, settings, experiment))
    print(f"{report.p_hat!r}")
    return EXIT_OK


def cmd_replicate(args, settings: Settings) -> int:
    experiment = load_experiment(args.config)
    block = experiment.config.replication
    if block is None:
        raise ConfigError(f"{args.config}: replicate needs a replication block")
    base_seed = block.base_seed if args.seed is None else args.seed
    if args.seed is not None:
        block = block.model_copy(update={"base_seed": base_seed})
        experiment.config = experiment.config.model_copy(update={"replication": block})
    true_pf = resolve_true_pf(experiment)
    workers = args.workers or settings.workers

    summaries, per_rep, params_rows, details = [], [], [], []
    for config in sweep_configs(experiment.config.estimator, block.sample_sizes, block.prior_strengths):
        summary, reports = replicate(
            config, experiment.lsf, experiment.input_model, block.repetitions, base_seed, true_pf, workers,
        )
        summaries.append(summary.csv_row())
        per_rep.extend(r.csv_row() for r in reports)
        detail = {"summary": summary.model_dump(exclude={"mean_final_params"})}
        if summary.mean_final_params is not None:
            mean_params = np.asarray(summary.mean_final_params)
            detail["most_shifted_states"] = most_shifted_states(mean_params, experiment.input_model)
            if config.method == "bice":
                b = "" if config.prior_strength is None else repr(float(config.prior_strength))
                for d, labels in enumerate(experiment.input_model.labels):
                    for i, label in enumerate(labels):
                        params_rows.append({
                            "N": config.samples_per_level,
                            "b": b,
                            "dimension": d + 1,
                            "state": repr(float(label)),
                            "input_probability": repr(experiment.input_model.probabilities[d][i]),
                            "mean_probability": repr(float(mean_params[d, i])),
                        })
        details.append(detail)

    bundle = OutputBundle()
    if _wants(experiment, "csv"):
        bundle.add_csv(f"{experiment.name}_summary.csv", summaries, SUMMARY_FIELDS)
        bundle.add_csv(f"{experiment.name}_replications.csv", per_rep, RUN_FIELDS)
        if params_rows:
            bundle.add_csv(f"{experiment.name}_final_params.csv", params_rows, PARAM_FIELDS)
    if _wants(experiment, "json"):
        bundle.add_json(f"{experiment.name}_summary.json", details)
    bundle.commit(output_dir(args, settings, experiment))
    return EXIT_OK


def cmd_oracle(args, settings: Settings) -> int:
    experiment = load_experiment(args.config)
    value, method = oracle_pf(experiment)
    print(f"{value:.17g}")
    bundle = OutputBundle()
    bundle.add_json(
        f"{experiment.name}_truth.json",
        {"name": experiment.name, "p_f": value, "method": method},
    )
    bundle.commit(output_dir(args, settings, experiment))
    return EXIT_OK


def cmd_gen_fixture(args, settings: Settings) -> int:
    if args.name not in FIXTURES:
        raise ConfigError(f"unknown fixture '{args.name}'; available: {', '.join(sorted(FIXTURES))}")
    out_dir = output_dir(args, settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in FIXTURES[args.name]:
        shutil.copyfile(FIXTURE_DIR / name, out_dir / name)
        logger.info(f"Wrote {out_dir / name}")
        print(out_dir / name)
    return EXIT_OK


def cmd_cascade(args, settings: Settings) -> int:
    grid = load_case_file(args.case)
    states = np.ones(grid.dims)
    for token in filter(None, (args.failed or "").split(",")):
        k = int(token)
        if not 1 <= k <= grid.dims:
            raise ConfigError(f"branch {k} outside 1..{grid.dims}")
        states[k - 1] = 0
    result = cascade(grid, states)
    if args.out:
        dump_cascade(result, args.out)
    else:
        sys.stdout.write(render_json(result))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netrel",
        description="Rare-event network reliability estimation (MCS, IS, CE, iCE, BiCE)",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Override the estimator seed / replication base seed")
    common.add_argument("--workers", type=int, default=None, help="Parallel replication workers")
    common.add_argument("--out-dir", default=None, help="Output directory (overrides NETREL_OUT_DIR)")

    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="One estimation")
    run.add_argument("config")
    run.set_defaults(handler=cmd_run)

    rep = sub.add_parser("replicate", parents=[common], help="Replication study and sweeps")
    rep.add_argument("config")
    rep.set_defaults(handler=cmd_replicate)

    oracle = sub.add_parser("oracle", parents=[common], help="Exact failure probability")
    oracle.add_argument("config")
    oracle.set_defaults(handler=cmd_oracle)

    fixture = sub.add_parser("gen-fixture", parents=[common], help="Write a bundled fixture to disk")
    fixture.add_argument("name", help=f"One of: {', '.join(sorted(FIXTURES))}")
    fixture.set_defaults(handler=cmd_gen_fixture)

    casc = sub.add_parser("cascade", help="Cascade equilibrium of one branch outage set, as JSON")
    casc.add_argument("case")
    casc.add_argument("--failed", default="", help="Comma-separated 1-based branch numbers")
    casc.add_argument("--out", default=None)
    casc.set_defaults(handler=cmd_cascade)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Settings()
        return args.handler(args, settings)
    except (ConfigError, ParseError, ValidationError, FileNotFoundError) as e:
        logger.debug("Configuration error", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StateSpaceTooLargeError as e:
        logger.debug("Oracle refused", exc_info=True)
        print(f"error: {e}; use replication true_pf \"mcs\" for a Monte Carlo reference", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
