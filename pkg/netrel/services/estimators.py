"""
Failure Probability Estimators
Crude Monte Carlo, fixed-density importance sampling, multilevel cross entropy,
improved cross entropy (iCE) and Bayesian improved cross entropy (BiCE) over
independent categorical inputs.
"""

import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from netrel.errors import DegenerateWeightsError, SupportViolationError
from netrel.models.categorical import DirichletPrior, IndependentCategorical, WeightedSampleBatch
from netrel.models.schema import EstimatorConfig, EstimatorReport
from netrel.services.categorical import (
    log_pmf_indices,
    map_estimate,
    posterior_predictive,
    sample,
    symmetric_prior,
    weighted_mle,
)
from netrel.services.limit_state import CountingLsf, LimitStateModel
from netrel.services.oracles import ess
from netrel.services.smoothing import (
    auxiliary_lsf,
    convergence_check,
    solve_sigma,
    standard_weights,
)

logger = logging.getLogger(__name__)


class IsResult(BaseModel):
    """Point estimate plus its per-sample terms."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    p_hat: float
    terms: np.ndarray


def kl_cov_lower_bound(kl_divergence: float, sample_count: int) -> float:
    """c.o.v. of the IS estimator implied by the KL divergence D from the optimal density."""
    if kl_divergence < 0 or sample_count < 1:
        raise ValueError("need D >= 0 and N >= 1")
    return math.sqrt(math.expm1(kl_divergence) / sample_count)


def mcs_cov(p: float, sample_count: int) -> float:
    """Theoretical c.o.v. of crude Monte Carlo, sqrt((1-p)/(N p)); +inf for p = 0."""
    if p <= 0:
        return math.inf
    return math.sqrt((1.0 - p) / (sample_count * p))


def _is_terms(
    batch: WeightedSampleBatch,
    failed: np.ndarray,
    input_model: IndependentCategorical,
    is_model: IndependentCategorical,
) -> IsResult:
    terms = np.zeros(batch.size)
    if np.any(failed):
        idx = batch.indices[failed]
        log_is = log_pmf_indices(is_model, idx)
        if np.any(np.isneginf(log_is)):
            raise SupportViolationError(
                "IS density is zero at a failed sample; the estimator would be biased"
            )
        terms[failed] = np.exp(log_pmf_indices(input_model, idx) - log_is)
    return IsResult(p_hat=float(np.mean(terms)), terms=terms)


def crude_mcs(lsf: LimitStateModel, input_model: IndependentCategorical, sample_count: int,
              rng: np.random.Generator, seed: int = 0) -> EstimatorReport:
    """Sample mean of the failure indicator under the input PMF."""
    counter = CountingLsf(lsf)
    batch = sample(input_model, rng, sample_count)
    failed = counter.evaluate(batch.states) <= 0
    p_hat = float(np.mean(failed))
    return EstimatorReport(
        method="mcs", p_hat=p_hat, samples_per_level=sample_count, lsf_calls=counter.calls,
        final_params=input_model, cov_estimate=mcs_cov(p_hat, sample_count), seed=seed,
    )


def is_estimate(lsf: LimitStateModel, input_model: IndependentCategorical,
                is_model: IndependentCategorical, sample_count: int,
                rng: np.random.Generator, seed: int = 0) -> EstimatorReport:
    """
    Importance sampling with a fixed proposal.

    Raises:
        SupportViolationError: If a failed sample has zero proposal probability.
    """
    if not input_model.same_shape(is_model):
        raise ValueError("IS model layout differs from the input model")
    counter = CountingLsf(lsf)
    batch = sample(is_model, rng, sample_count)
    failed = counter.evaluate(batch.states) <= 0
    result = _is_terms(batch, failed, input_model, is_model)
    cov = None
    if result.p_hat > 0:
        cov = float(np.std(result.terms, ddof=1) / (math.sqrt(sample_count) * result.p_hat))
    return EstimatorReport(
        method="is", p_hat=result.p_hat, samples_per_level=sample_count, lsf_calls=counter.calls,
        final_params=is_model, cov_estimate=cov, seed=seed,
    )


def lower_quantile(values: np.ndarray, rho: float) -> float:
    """k-th order statistic with k = ceil(rho * N)."""
    k = max(1, math.ceil(rho * len(values)))
    return float(np.partition(values, k - 1)[k - 1])


def ce_run(lsf: LimitStateModel, input_model: IndependentCategorical, config: EstimatorConfig,
           rng: np.random.Generator) -> EstimatorReport:
    """Multilevel cross entropy with rho-quantile intermediate thresholds."""
    counter = CountingLsf(lsf)
    n = config.samples_per_level
    model = input_model
    gammas, ess_levels = [], []
    gamma_prev = math.inf
    abort_reason = ""
    converged = False
    batch = failed = None
    drawn_from = model

    for t in range(1, config.t_max + 1):
        drawn_from = model
        batch = sample(model, rng, n)
        g = counter.evaluate(batch.states)
        failed = g <= 0
        gamma = lower_quantile(g, config.rho)
        if gamma >= gamma_prev and gamma > 0:
            abort_reason = f"threshold stagnated at level {t} (gamma {gamma:.6g} >= {gamma_prev:.6g})"
            logger.warning(f"CE aborted: {abort_reason}")
            break
        gamma = max(gamma, 0.0)
        gammas.append(gamma)
        log_w = log_pmf_indices(input_model, batch.indices) - log_pmf_indices(model, batch.indices)
        log_w = np.where(g <= gamma, log_w, -np.inf)
        weights = np.exp(log_w - np.max(log_w))
        try:
            params = weighted_mle(batch.with_weights(weights), model)
        except DegenerateWeightsError as e:
            abort_reason = f"degenerate weights at level {t}: {e}"
            logger.warning(f"CE aborted: {abort_reason}")
            break
        ess_levels.append(ess(weights))
        logger.info(f"CE level {t}: gamma={gamma:.6g}, failures={int(np.sum(failed))}/{n}")
        model = model.with_probabilities(params)
        gamma_prev = gamma
        if gamma == 0.0:
            converged = True
            break
    else:
        abort_reason = f"t_max={config.t_max} reached"
        logger.warning(f"CE stopped: {abort_reason}")

    levels = len(gammas)
    if converged:
        batch = sample(model, rng, n)
        failed = counter.evaluate(batch.states) <= 0
        result = _is_terms(batch, failed, input_model, model)
    else:
        # flagged estimate from the last batch under the density that drew it
        result = _is_terms(batch, failed, input_model, drawn_from)
    return EstimatorReport(
        method="ce", p_hat=result.p_hat, samples_per_level=n, levels=levels,
        gamma_sequence=gammas, ess_sequence=ess_levels, lsf_calls=counter.calls,
        final_params=model, converged=converged, abort_reason=abort_reason, seed=config.seed,
    )


def _adaptive_run(lsf: LimitStateModel, input_model: IndependentCategorical, config: EstimatorConfig,
                  rng: np.random.Generator, prior: Optional[DirichletPrior]) -> EstimatorReport:
    """Shared level loop of iCE (prior None) and BiCE."""
    counter = CountingLsf(lsf)
    n = config.samples_per_level
    bayesian = prior is not None
    sigma_mode = config.sigma_weights or ("alternative" if bayesian else "standard")
    model = input_model
    sigma_prev = math.inf
    sigmas, deltas, ess_levels = [], [], []
    t = 1

    while True:
        batch = sample(model, rng, n)
        g_a = auxiliary_lsf(counter.evaluate(batch.states))
        check = convergence_check(g_a, sigma_prev, config.delta_epsilon)
        deltas.append(check.delta)
        logger.info(
            f"{config.method} level {t}: failures={int(np.sum(g_a == 0))}/{n}, "
            f"delta={check.delta:.4g}, sigma_prev={sigma_prev:.4g}"
        )
        if t > config.t_max or check.converged:
            break

        if sigma_mode == "alternative":
            solution = solve_sigma(g_a, sigma_prev, config.delta_target, "alternative")
        else:
            log_ratio = log_pmf_indices(input_model, batch.indices) - log_pmf_indices(model, batch.indices)
            solution = solve_sigma(g_a, sigma_prev, config.delta_target, "standard", log_ratio=log_ratio)
        sigma = solution.sigma
        weights = standard_weights(batch, g_a, sigma, input_model, model, shift=True)
        weighted = batch.with_weights(weights, normalize=True)
        params = weighted_mle(weighted, model)
        if bayesian:
            if config.bice_update == "map":
                params = map_estimate(params, n, prior)
            else:
                params = posterior_predictive(params, n, prior)
        ess_levels.append(ess(weights))
        sigmas.append(sigma)
        model = model.with_probabilities(params)
        sigma_prev = sigma
        t += 1

    levels = t - 1
    converged = check.converged
    if not converged:
        logger.warning(f"{config.method} reached t_max={config.t_max} without meeting delta_epsilon")
    if config.fresh_final_batch:
        batch = sample(model, rng, n)
        g_a = auxiliary_lsf(counter.evaluate(batch.states))
    result = _is_terms(batch, g_a <= 0, input_model, model)
    return EstimatorReport(
        method=config.method, p_hat=result.p_hat, samples_per_level=n, levels=levels,
        sigma_sequence=sigmas, delta_sequence=deltas, ess_sequence=ess_levels,
        lsf_calls=counter.calls, final_params=model, converged=converged,
        abort_reason="" if converged else f"t_max={config.t_max} reached",
        prior_strength=config.prior_strength if bayesian else None, seed=config.seed,
    )


def ice_run(lsf: LimitStateModel, input_model: IndependentCategorical, config: EstimatorConfig,
            rng: np.random.Generator) -> EstimatorReport:
    """Improved cross entropy: smoothed targets, standard weights, weighted MLE updates."""
    return _adaptive_run(lsf, input_model, config, rng, prior=None)


def bice_run(lsf: LimitStateModel, input_model: IndependentCategorical, config: EstimatorConfig,
             rng: np.random.Generator, prior: Optional[DirichletPrior] = None) -> EstimatorReport:
    """
    Bayesian improved cross entropy.

    Sigma is chosen with the alternative weights; parameters are updated with the
    Dirichlet posterior predictive (or MAP) of the weighted MLE.
    """
    if prior is None:
        prior = symmetric_prior(input_model, config.prior_strength)
    prior.check_matches(input_model)
    return _adaptive_run(lsf, input_model, config, rng, prior=prior)


def run_estimator(lsf: LimitStateModel, input_model: IndependentCategorical,
                  config: EstimatorConfig, is_model: Optional[IndependentCategorical] = None) -> EstimatorReport:
    """Dispatch on config.method with a stream seeded from config.seed."""
    rng = np.random.default_rng(config.seed)
    if config.method == "mcs":
        return crude_mcs(lsf, input_model, config.samples_per_level, rng, seed=config.seed)
    if config.method == "is":
        if is_model is None:
            raise ValueError("method 'is' needs an IS model")
        return is_estimate(lsf, input_model, is_model, config.samples_per_level, rng, seed=config.seed)
    if config.method == "ce":
        return ce_run(lsf, input_model, config, rng)
    if config.method == "ice":
        return ice_run(lsf, input_model, config, rng)
    return bice_run(lsf, input_model, config, rng)
