"""
Replication Harness
Runs R independently seeded estimations (in parallel when asked), summarizes
relative bias, sample c.o.v. and cost, and sweeps sample sizes / prior strengths.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np

from netrel.models.categorical import IndependentCategorical
from netrel.models.schema import EstimatorConfig, EstimatorReport, ReplicationSummary
from netrel.services.categorical import sample
from netrel.services.estimators import mcs_cov, run_estimator
from netrel.services.limit_state import LimitStateModel
from netrel.services.oracles import mcs_equivalent_cov

logger = logging.getLogger(__name__)

MCS_CHUNK = 100_000

Runner = Callable[[LimitStateModel, IndependentCategorical, EstimatorConfig], EstimatorReport]


def replication_seeds(base_seed: int, repetitions: int) -> List[int]:
    """Replication r runs with seed base_seed + r."""
    return [base_seed + r for r in range(repetitions)]


def _run_one(task) -> EstimatorReport:
    runner, lsf, input_model, config = task
    return runner(lsf, input_model, config)


def run_replications(
    config: EstimatorConfig,
    lsf: LimitStateModel,
    input_model: IndependentCategorical,
    repetitions: int,
    base_seed: int = 0,
    workers: int = 1,
    runner: Optional[Runner] = None,
) -> List[EstimatorReport]:
    """Reports in replication order regardless of worker count."""
    runner = runner or run_estimator
    tasks = [
        (runner, lsf, input_model, config.model_copy(update={"seed": seed}))
        for seed in replication_seeds(base_seed, repetitions)
    ]
    if workers <= 1:
        reports = []
        for r, task in enumerate(tasks, start=1):
            reports.append(_run_one(task))
            if r % max(1, repetitions // 10) == 0:
                logger.info(f"{config.method} N={config.samples_per_level}: {r}/{repetitions} replications done")
        return reports
    logger.info(f"Running {repetitions} replications of {config.method} on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, tasks, chunksize=max(1, repetitions // (4 * workers))))


def mean_final_params(reports: List[EstimatorReport]) -> Optional[np.ndarray]:
    tables = [r.final_params.prob_table for r in reports if r.final_params is not None]
    if len(tables) != len(reports) or not tables:
        return None
    return np.mean(tables, axis=0)


def summarize(
    config: EstimatorConfig,
    reports: List[EstimatorReport],
    true_pf: float,
) -> ReplicationSummary:
    """
    Relative bias mean/true - 1, sample c.o.v. sd/mean (ddof 1) and mean cost.
    Non-converged runs are kept in every statistic and counted in fail_count.
    """
    if len(reports) < 2:
        raise ValueError("a replication summary needs at least 2 runs")
    if not true_pf > 0:
        raise ValueError(f"true_pf must be > 0, got {true_pf}")
    estimates = np.array([r.p_hat for r in reports])
    mean = float(np.mean(estimates))
    cov = float(np.std(estimates, ddof=1) / mean) if mean > 0 else math.inf
    cost = float(np.mean([r.lsf_calls for r in reports]))
    params = mean_final_params(reports) if config.method != "mcs" else None
    fails = sum(1 for r in reports if not r.converged)
    if fails:
        logger.warning(f"{config.method}: {fails}/{len(reports)} runs did not converge (kept in statistics)")
    return ReplicationSummary(
        method=config.method,
        samples_per_level=config.samples_per_level,
        prior_strength=config.prior_strength if config.method == "bice" else None,
        delta_target=config.delta_target,
        repetitions=len(reports),
        true_pf=true_pf,
        mean_estimate=mean,
        relative_bias=mean / true_pf - 1.0,
        sample_cov=cov,
        mean_cost=cost,
        fail_count=fails,
        mcs_cov_same_cost=mcs_equivalent_cov(true_pf, cost),
        mean_final_params=None if params is None else params.tolist(),
    )


def replicate(
    config: EstimatorConfig,
    lsf: LimitStateModel,
    input_model: IndependentCategorical,
    repetitions: int,
    base_seed: int,
    true_pf: float,
    workers: int = 1,
    runner: Optional[Runner] = None,
) -> Tuple[ReplicationSummary, List[EstimatorReport]]:
    reports = run_replications(config, lsf, input_model, repetitions, base_seed, workers, runner)
    summary = summarize(config, reports, true_pf)
    logger.info(
        f"{config.method} N={config.samples_per_level} b={config.prior_strength}: "
        f"rel_bias={summary.relative_bias:.4f}, cov={summary.sample_cov:.4f}, cost={summary.mean_cost:.1f}"
    )
    return summary, reports


def sweep_configs(
    config: EstimatorConfig,
    sample_sizes: Optional[List[int]] = None,
    prior_strengths: Optional[List[float]] = None,
) -> List[EstimatorConfig]:
    """Cartesian product of sample sizes and (for bice) prior strengths."""
    sizes = sample_sizes or [config.samples_per_level]
    strengths = prior_strengths if (prior_strengths and config.method == "bice") else [config.prior_strength]
    return [
        config.model_copy(update={"samples_per_level": n, "prior_strength": b})
        for n in sizes
        for b in strengths
    ]


def most_shifted_states(
    mean_params: np.ndarray,
    input_model: IndependentCategorical,
    top: int = 5,
) -> List[dict]:
    """Dimension/state pairs whose mean fitted probability moved furthest from p_X."""
    shift = np.abs(np.asarray(mean_params) - input_model.prob_table)
    order = np.argsort(shift, axis=None)[::-1][:top]
    rows = []
    for flat in order:
        d, i = np.unravel_index(flat, shift.shape)
        if i >= input_model.state_counts[d]:
            continue
        rows.append({
            "dimension": int(d) + 1,
            "state": input_model.labels[d][i],
            "input_probability": float(input_model.prob_table[d, i]),
            "mean_probability": float(mean_params[d][i]),
        })
    return rows


def mcs_truth(
    lsf: LimitStateModel,
    input_model: IndependentCategorical,
    sample_count: int,
    seed: int,
) -> Tuple[float, float]:
    """
    Reference p_f by crude MCS, evaluated in chunks.

    Returns:
        tuple: (estimate, its c.o.v.).
    """
    rng = np.random.default_rng(seed)
    failures = 0
    done = 0
    while done < sample_count:
        count = min(MCS_CHUNK, sample_count - done)
        batch = sample(input_model, rng, count)
        failures += int(np.sum(np.asarray(lsf.evaluate(batch.states)) <= 0))
        done += count
        logger.info(f"MCS truth: {done}/{sample_count} samples, {failures} failures")
    p_hat = failures / sample_count
    return p_hat, mcs_cov(p_hat, sample_count)
