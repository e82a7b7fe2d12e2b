"""
Categorical Model Service
Sampling, PMF evaluation and parameter fitting for independent categorical
families: weighted MLE, Dirichlet posterior predictive and MAP updates.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from netrel.errors import DegenerateWeightsError, ShapeMismatchError, UnsupportedPriorError
from netrel.models.categorical import DirichletPrior, IndependentCategorical, WeightedSampleBatch

logger = logging.getLogger(__name__)


def log_pmf_indices(model: IndependentCategorical, indices: np.ndarray) -> np.ndarray:
    """
    Row-wise log PMF for state-index matrices.

    Args:
        model (IndependentCategorical): Distribution to evaluate.
        indices (np.ndarray): (N, n) state indices.

    Returns:
        np.ndarray: N log probabilities, -inf where a selected probability is 0.
    """
    indices = np.atleast_2d(indices)
    rows = np.arange(model.dims)
    return model.log_prob_table[rows, indices].sum(axis=1)


def log_pmf(model: IndependentCategorical, x) -> float:
    """
    Log probability of a single state vector given by its labels.

    Raises:
        InvalidStateError: If an entry is not a label of its dimension.
    """
    indices = model.indices_of(np.asarray(x, dtype=float).reshape(1, -1))
    return float(log_pmf_indices(model, indices)[0])


def sample(model: IndependentCategorical, rng: np.random.Generator, count: int) -> WeightedSampleBatch:
    """
    Draw `count` independent rows by inverse-CDF sampling in declared state order.

    Args:
        model (IndependentCategorical): Distribution to sample.
        rng (np.random.Generator): Seeded stream, never shared between threads.
        count (int): Number of rows N >= 1.

    Returns:
        WeightedSampleBatch: Batch with states only (no LSF values or weights).
    """
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    u = rng.random((count, model.dims))
    cdf = model.cumulative_table
    # first state whose cumulative probability exceeds u
    indices = (u[:, :, None] >= cdf[None, :, :]).sum(axis=2)
    indices = np.minimum(indices, model.state_counts - 1)
    return WeightedSampleBatch(indices=indices, states=model.labels_of(indices))


def weighted_mle(batch: WeightedSampleBatch, shape: IndependentCategorical) -> np.ndarray:
    """
    Weighted maximum likelihood estimate of the categorical parameters.

    Args:
        batch (WeightedSampleBatch): Samples with non-negative weights.
        shape (IndependentCategorical): Model whose layout the estimate follows.

    Returns:
        np.ndarray: (n, max n_d) parameter table; zero counts stay zero.

    Raises:
        DegenerateWeightsError: If the weights carry no mass.
    """
    if batch.weights is None:
        raise ValueError("batch has no weights")
    weights = batch.weights
    total = float(np.sum(weights))
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateWeightsError("all sample weights are zero; the level produced no mass")
    params = np.zeros_like(shape.prob_table)
    for d, k in enumerate(shape.state_counts):
        counts = np.bincount(batch.indices[:, d], weights=weights, minlength=k)
        # own sum per dimension: a collapsed dimension lands on exactly 1
        params[d, :k] = np.clip(counts / counts.sum(), 0.0, 1.0)
    return params


def _check_prior(params: np.ndarray, prior: DirichletPrior) -> np.ndarray:
    theta = prior.table
    if theta.shape != params.shape:
        raise ShapeMismatchError(f"prior table shape {theta.shape} does not match parameters {params.shape}")
    return theta


def posterior_predictive(params: np.ndarray, sample_count: int, prior: DirichletPrior) -> np.ndarray:
    """
    Dirichlet posterior predictive mean of the categorical parameters.

    Every entry is at least theta_i / (N + sum(theta)) > 0, so no state loses support.

    Args:
        params (np.ndarray): Weighted MLE table (normalized weights sum to N).
        sample_count (int): Batch size N.
        prior (DirichletPrior): Concentration parameters, same shape as params.

    Returns:
        np.ndarray: Updated parameter table.
    """
    if sample_count < 1:
        raise ValueError(f"sample count must be >= 1, got {sample_count}")
    theta = _check_prior(params, prior)
    strength = theta.sum(axis=1, keepdims=True)
    return (sample_count * params + theta) / (sample_count + strength)


def map_estimate(params: np.ndarray, sample_count: int, prior: DirichletPrior) -> np.ndarray:
    """
    Mode of the Dirichlet posterior (MAP estimate).

    Raises:
        UnsupportedPriorError: If any concentration parameter is below 1.
    """
    theta = _check_prior(params, prior)
    if np.any(prior.table[prior.table > 0] < 1.0):
        raise UnsupportedPriorError("MAP estimate needs all Dirichlet parameters >= 1")
    shifted = np.where(theta > 0, theta - 1.0, 0.0)
    return (sample_count * params + shifted) / (sample_count + shifted.sum(axis=1, keepdims=True))


def symmetric_prior(shape: IndependentCategorical, b: float) -> DirichletPrior:
    """Symmetric Dirichlet prior with every parameter equal to b."""
    if not b > 0:
        raise ValueError(f"prior strength b must be > 0, got {b}")
    return DirichletPrior(concentrations=[[float(b)] * int(k) for k in shape.state_counts])


def dump_model(model: IndependentCategorical, path: Union[str, Path]) -> None:
    """Write a model as JSON; floats use shortest round-trip repr."""
    Path(path).write_text(model.model_dump_json(indent=2), encoding="utf-8")


def load_model(path: Union[str, Path]) -> IndependentCategorical:
    return IndependentCategorical.model_validate_json(Path(path).read_text(encoding="utf-8"))
