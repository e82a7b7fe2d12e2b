"""
Smoothing and Weights Service
Auxiliary LSF, smoothed failure indicator, importance weights, sample c.o.v.,
adaptive selection of the smoothing parameter sigma and the stopping rule of the
improved cross-entropy level schedule. All computations run in the log domain.
"""

import logging
import math
from typing import Literal, Optional

import numpy as np
import scipy.optimize as spo
from pydantic import BaseModel
from scipy.special import log_ndtr

from netrel.errors import SupportViolationError, UndefinedCovError
from netrel.models.categorical import IndependentCategorical, WeightedSampleBatch
from netrel.services.categorical import log_pmf_indices

logger = logging.getLogger(__name__)

LOG_HALF = math.log(0.5)
SIGMA_FLOOR_SCALE = 1e-10
SIGMA_RTOL = 1e-6
WeightMode = Literal["standard", "alternative"]


class SigmaSolution(BaseModel):
    """Outcome of one sigma update."""
    sigma: float
    delta: float
    converged: bool = False
    method: str = "bisection"


class ConvergenceCheck(BaseModel):
    converged: bool
    delta: float


def auxiliary_lsf(g):
    """
    Clamp an LSF value (or array) at zero: failures all map to g_a = 0.

    Raises:
        ValueError: If any value is not finite.
    """
    arr = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("LSF evaluation returned a non-finite value")
    out = np.maximum(arr, 0.0)
    return float(out) if out.ndim == 0 else out


def log_smooth_indicator(g_a, sigma: float):
    """
    ln Phi(-g_a / sigma), stable far into the lower tail.

    sigma = +inf gives ln 0.5 everywhere. For sigma -> 0 the limit is ln 0.5 at
    g_a = 0 and -inf for g_a > 0.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    g_a = np.asarray(g_a, dtype=float)
    if math.isinf(sigma):
        out = np.full(g_a.shape, LOG_HALF)
    else:
        with np.errstate(over="ignore"):
            out = log_ndtr(-g_a / sigma)
    return float(out) if out.ndim == 0 else out


def standard_log_weights(
    batch: WeightedSampleBatch,
    g_a: np.ndarray,
    sigma: float,
    input_model: IndependentCategorical,
    ref_model: IndependentCategorical,
) -> np.ndarray:
    """
    ln of p_X(x) Phi(-g_a(x)/sigma) / p_ref(x) per sample.

    Raises:
        SupportViolationError: If the reference PMF is zero at a sampled state.
    """
    log_ref = log_pmf_indices(ref_model, batch.indices)
    if np.any(np.isneginf(log_ref)):
        raise SupportViolationError("reference model assigns zero probability to a sampled state")
    return log_pmf_indices(input_model, batch.indices) + log_smooth_indicator(g_a, sigma) - log_ref


def _exp_shifted(log_w: np.ndarray) -> np.ndarray:
    top = np.max(log_w)
    if not np.isfinite(top):
        return np.zeros_like(log_w)
    return np.exp(log_w - top)


def standard_weights(
    batch: WeightedSampleBatch,
    g_a: np.ndarray,
    sigma: float,
    input_model: IndependentCategorical,
    ref_model: IndependentCategorical,
    shift: bool = False,
) -> np.ndarray:
    """
    Importance weights of the smoothed intermediate target.

    Args:
        shift (bool): Subtract the max log-weight before exponentiating. Only
            self-normalized consumers (fitting, c.o.v.) may ask for this.
    """
    log_w = standard_log_weights(batch, g_a, sigma, input_model, ref_model)
    return _exp_shifted(log_w) if shift else np.exp(log_w)


def alternative_log_weights(g_a: np.ndarray, sigma: float, sigma_prev: float) -> np.ndarray:
    if sigma > sigma_prev:
        raise ValueError(f"trial sigma {sigma} exceeds previous sigma {sigma_prev}")
    if sigma == sigma_prev:
        return np.zeros(np.shape(g_a))
    return log_smooth_indicator(g_a, sigma) - log_smooth_indicator(g_a, sigma_prev)


def alternative_weights(g_a: np.ndarray, sigma: float, sigma_prev: float) -> np.ndarray:
    """Phi(-g_a/sigma) / Phi(-g_a/sigma_prev); exactly 1 where g_a = 0 or sigma = sigma_prev."""
    return np.exp(alternative_log_weights(np.asarray(g_a, dtype=float), sigma, sigma_prev))


def sample_cov(values: np.ndarray) -> float:
    """
    Sample c.o.v.: unbiased standard deviation over the mean.

    Raises:
        UndefinedCovError: If the mean is zero.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("sample c.o.v. needs at least 2 values")
    mean = float(np.mean(values))
    if not mean > 0:
        raise UndefinedCovError("mean of values is zero")
    return float(np.std(values, ddof=1) / mean)


def _cov_or_inf(values: np.ndarray) -> float:
    try:
        return sample_cov(values)
    except UndefinedCovError:
        return math.inf


def sigma_floor(g_a: np.ndarray) -> float:
    top = float(np.max(g_a)) if np.size(g_a) else 0.0
    return SIGMA_FLOOR_SCALE * (top if top > 0 else 1.0)


def solve_sigma(
    g_a: np.ndarray,
    sigma_prev: float,
    delta_target: float,
    weight_mode: WeightMode = "alternative",
    log_ratio: Optional[np.ndarray] = None,
) -> SigmaSolution:
    """
    Choose sigma so that the sample c.o.v. of the level weights hits delta_target.

    The c.o.v. decreases with sigma, so the root is bracketed on ln(sigma) between
    the floor and sigma_prev (10 * max g_a when sigma_prev is infinite) and found by
    bisection. Without a valid bracket, |c.o.v. - target| is minimized instead.

    Args:
        g_a (np.ndarray): Auxiliary LSF values of the current reference batch.
        sigma_prev (float): Previous sigma, math.inf at the first level.
        delta_target (float): Target c.o.v. (> 0).
        weight_mode (str): "standard" uses p_X Phi / p_ref, "alternative" the Phi ratio.
        log_ratio (np.ndarray, optional): ln p_X - ln p_ref per sample, standard mode only.

    Returns:
        SigmaSolution: sigma < sigma_prev and its c.o.v.
    """
    if not delta_target > 0:
        raise ValueError(f"delta_target must be > 0, got {delta_target}")
    g_a = np.asarray(g_a, dtype=float)
    floor = sigma_floor(g_a)
    if not np.any(g_a > 0):
        return SigmaSolution(sigma=floor, delta=0.0, converged=True, method="all-failed")
    if weight_mode == "standard" and log_ratio is None:
        raise ValueError("standard weight mode needs the per-sample log likelihood ratio")

    def delta_at(log_sigma: float) -> float:
        sigma = math.exp(log_sigma)
        if weight_mode == "alternative":
            log_w = alternative_log_weights(g_a, sigma, sigma_prev)
        else:
            log_w = log_ratio + log_smooth_indicator(g_a, sigma)
        return _cov_or_inf(_exp_shifted(log_w))

    upper = 10.0 * float(np.max(g_a)) if math.isinf(sigma_prev) else sigma_prev
    lo, hi = math.log(floor), math.log(upper) + math.log1p(-SIGMA_RTOL)
    if hi <= lo:
        return SigmaSolution(sigma=floor, delta=delta_at(lo), converged=True, method="floor")

    d_lo = delta_at(lo)
    if d_lo <= delta_target:
        return SigmaSolution(sigma=floor, delta=d_lo, method="floor")

    d_hi = delta_at(hi)
    if d_hi < delta_target:
        log_sigma = spo.bisect(lambda s: delta_at(s) - delta_target, lo, hi, xtol=SIGMA_RTOL)
        method = "bisection"
    else:
        logger.warning(
            f"No c.o.v. bracket for sigma (delta at upper bound {d_hi:.4g} >= target "
            f"{delta_target}); falling back to bounded minimization"
        )
        log_sigma = spo.fminbound(lambda s: abs(delta_at(s) - delta_target), lo, hi, xtol=SIGMA_RTOL)
        method = "minimization"
    sigma = min(math.exp(log_sigma), math.exp(hi))
    return SigmaSolution(sigma=sigma, delta=delta_at(math.log(sigma)), method=method)


def convergence_check(g_a: np.ndarray, sigma_prev: float, delta_epsilon: float) -> ConvergenceCheck:
    """
    Stopping rule: c.o.v. of I{g_a = 0} / Phi(-g_a / sigma_prev) at most delta_epsilon.

    Without any failed sample the c.o.v. is reported as +inf and the level is not converged.
    """
    g_a = np.asarray(g_a, dtype=float)
    failed = g_a <= 0
    if not np.any(failed):
        return ConvergenceCheck(converged=False, delta=math.inf)
    ratios = np.zeros(g_a.shape)
    ratios[failed] = np.exp(-log_smooth_indicator(g_a[failed], sigma_prev))
    delta = sample_cov(ratios)
    return ConvergenceCheck(converged=delta <= delta_epsilon, delta=delta)
