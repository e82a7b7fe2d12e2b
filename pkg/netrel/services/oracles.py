"""
Exact Oracles and Weight Diagnostics
Exact failure probabilities by enumeration or lattice convolution, the
self-normalized IS estimator, effective sample size, and exact c.o.v. curves of
the sigma-update weights on enumerable instances.
"""

import logging
import math
from typing import Iterator, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from netrel.errors import DegenerateWeightsError, NonLatticeError, StateSpaceTooLargeError
from netrel.models.categorical import IndependentCategorical
from netrel.services.categorical import log_pmf_indices
from netrel.services.smoothing import log_smooth_indicator, sample_cov

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10**7
ENUMERATION_CHUNK = 2**16
LATTICE_TOLERANCE = 1e-9


class DeltaCurve(BaseModel):
    sigmas: List[float]
    deltas: List[float]
    delta_at_prev: float
    delta_at_zero: float
    delta_at_zero_numeric: float
    normalizing_constant: float
    p_f: float


def iter_state_space(model: IndependentCategorical, limit: float = ENUMERATION_LIMIT) -> Iterator[np.ndarray]:
    """
    Yield the full sample space as (chunk, n) index matrices.

    Raises:
        StateSpaceTooLargeError: If prod(n_d) exceeds `limit`.
    """
    size = model.state_space_size
    if size > limit:
        raise StateSpaceTooLargeError(size, limit)
    shape = tuple(int(k) for k in model.state_counts)
    total = int(size)
    for start in range(0, total, ENUMERATION_CHUNK):
        flat = np.arange(start, min(start + ENUMERATION_CHUNK, total))
        yield np.stack(np.unravel_index(flat, shape), axis=1)


def enumerate_space(lsf, model: IndependentCategorical, limit: float = ENUMERATION_LIMIT):
    """Probabilities and LSF values of every state, in enumeration order."""
    probs, values = [], []
    for idx in iter_state_space(model, limit):
        probs.append(np.exp(log_pmf_indices(model, idx)))
        values.append(np.asarray(lsf.evaluate(model.labels_of(idx)), dtype=float))
    return np.concatenate(probs), np.concatenate(values)


def enumerate_exact_pf(lsf, input_model: IndependentCategorical, limit: float = ENUMERATION_LIMIT) -> float:
    """
    p_f = sum of p_X(x) over states with g(x) <= 0, with compensated summation.

    Raises:
        StateSpaceTooLargeError: If the sample space exceeds `limit` states.
    """
    probs, values = enumerate_space(lsf, input_model, limit)
    return math.fsum(probs[values <= 0].tolist())


def convolution_pf(coefficients: Sequence[float], model: IndependentCategorical, threshold: float) -> float:
    """
    P(sum_d c_d X_d >= threshold) by dynamic-programming convolution of the
    per-dimension PMFs on the integer lattice.

    Raises:
        NonLatticeError: If some c_d * s_di is not an integer.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (model.dims,):
        raise ValueError(f"{coefficients.size} coefficients for a {model.dims}-dimensional model")
    pmf = np.array([1.0])
    offset = 0
    for d in range(model.dims):
        contrib = coefficients[d] * np.asarray(model.labels[d], dtype=float)
        rounded = np.round(contrib)
        if np.any(np.abs(contrib - rounded) > LATTICE_TOLERANCE):
            raise NonLatticeError(f"dimension {d}: weighted states {contrib.tolist()} are not integers")
        rounded = rounded.astype(np.int64)
        low = int(rounded.min())
        kernel = np.zeros(int(rounded.max()) - low + 1)
        np.add.at(kernel, rounded - low, model.probabilities[d])
        pmf = np.convolve(pmf, kernel)
        offset += low
    support = np.arange(pmf.size) + offset
    return math.fsum(pmf[support >= threshold - LATTICE_TOLERANCE].tolist())


def self_normalized_estimate(h_values: np.ndarray, weights: np.ndarray) -> float:
    """
    sum_k (W_k / sum W) H(x_k).

    Raises:
        DegenerateWeightsError: If the weights sum to zero.
    """
    weights = np.asarray(weights, dtype=float)
    total = float(np.sum(weights))
    if not total > 0:
        raise DegenerateWeightsError("self-normalized estimate needs positive total weight")
    return float(np.dot(weights / total, np.asarray(h_values, dtype=float)))


def ess(weights: np.ndarray) -> float:
    """Effective sample size N / (1 + delta^2) from the weights' sample c.o.v."""
    weights = np.asarray(weights, dtype=float)
    try:
        delta = sample_cov(weights)
    except ArithmeticError as e:
        raise DegenerateWeightsError(str(e)) from e
    return weights.size / (1.0 + delta * delta)


def exact_delta_curve(
    lsf,
    input_model: IndependentCategorical,
    sigma_prev: float,
    sigmas: Sequence[float],
    zero_scale: float = 1e-12,
) -> DeltaCurve:
    """
    Exact c.o.v. of Phi(-g_a/sigma) / Phi(-g_a/sigma_prev) under the exact
    intermediate target p(x) proportional to p_X(x) Phi(-g_a(x)/sigma_prev).

    Also returns the endpoint values at sigma_prev and at sigma -> 0 (analytic and
    evaluated at sigma = zero_scale * max g_a), and the normalizing constant Z.
    """
    probs, values = enumerate_space(lsf, input_model)
    g_a = np.maximum(values, 0.0)
    failed = g_a == 0
    p_f = math.fsum(probs[failed].tolist())
    if not p_f > 0:
        raise ValueError("instance has no failure states")
    log_prev = log_smooth_indicator(g_a, sigma_prev)
    target = probs * np.exp(log_prev)
    z = 0.5 * p_f + math.fsum(target[~failed].tolist())
    target = target / math.fsum(target.tolist())

    def delta(sigma: float) -> float:
        ratio = np.exp(log_smooth_indicator(g_a, sigma) - log_prev)
        m1 = math.fsum((target * ratio).tolist())
        var = math.fsum((target * (ratio - m1) ** 2).tolist())
        return math.sqrt(var) / m1

    scale = float(g_a.max()) if g_a.max() > 0 else 1.0
    return DeltaCurve(
        sigmas=[float(s) for s in sigmas],
        deltas=[delta(float(s)) for s in sigmas],
        delta_at_prev=delta(sigma_prev) if math.isfinite(sigma_prev) else 0.0,
        delta_at_zero=math.sqrt(z / (0.5 * p_f) - 1.0),
        delta_at_zero_numeric=delta(zero_scale * scale),
        normalizing_constant=z,
        p_f=p_f,
    )


def mcs_equivalent_cov(p_f: float, cost: float) -> float:
    """c.o.v. of crude MCS spending the same number of LSF calls."""
    if p_f <= 0 or cost <= 0:
        return math.inf
    return math.sqrt((1.0 - p_f) / (cost * p_f))


def state_space_report(model: IndependentCategorical, limit: Optional[float] = None) -> str:
    limit = ENUMERATION_LIMIT if limit is None else limit
    size = model.state_space_size
    verdict = "enumerable" if size <= limit else "too large for enumeration"
    return f"{size:.6g} states ({verdict}, limit {limit:.3g})"
