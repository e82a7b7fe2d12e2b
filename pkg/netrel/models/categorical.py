"""
Independent Categorical Models
Pydantic models for the input PMF / parametric family, its Dirichlet prior, and
weighted sample batches. Probabilities are stored in the linear domain.
"""

from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from netrel.errors import InvalidStateError, ShapeMismatchError

SIMPLEX_TOLERANCE = 1e-12
NORMALIZED_TOLERANCE = 1e-9


class IndependentCategorical(BaseModel):
    """Product of independent categorical distributions, one per dimension."""

    model_config = ConfigDict(frozen=True)

    labels: List[List[float]] = Field(..., description="Ordered state labels per dimension")
    probabilities: List[List[float]] = Field(..., description="Probability vector per dimension")

    @field_validator("labels")
    @classmethod
    def check_labels(cls, v: List[List[float]]) -> List[List[float]]:
        if not v:
            raise ValueError("model needs at least one dimension")
        for d, states in enumerate(v):
            if len(states) < 2:
                raise ValueError(f"dimension {d} needs at least 2 states, got {len(states)}")
            if len(set(states)) != len(states):
                raise ValueError(f"dimension {d} has duplicate state labels {states}")
        return v

    @model_validator(mode="after")
    def check_simplex(self) -> "IndependentCategorical":
        if len(self.probabilities) != len(self.labels):
            raise ValueError(
                f"{len(self.probabilities)} probability vectors for {len(self.labels)} dimensions"
            )
        for d, (states, probs) in enumerate(zip(self.labels, self.probabilities)):
            if len(probs) != len(states):
                raise ValueError(f"dimension {d}: {len(probs)} probabilities for {len(states)} states")
            if any(not (0.0 <= p <= 1.0) for p in probs):
                raise ValueError(f"dimension {d}: probabilities must lie in [0, 1], got {probs}")
            total = float(np.sum(probs))
            if abs(total - 1.0) > SIMPLEX_TOLERANCE:
                raise ValueError(f"dimension {d}: probabilities sum to {total!r}, expected 1")
        return self

    @classmethod
    def iid(cls, dims: int, labels: Sequence[float], probabilities: Sequence[float]) -> "IndependentCategorical":
        """Same state set and PMF in every dimension."""
        return cls(
            labels=[list(map(float, labels)) for _ in range(dims)],
            probabilities=[list(map(float, probabilities)) for _ in range(dims)],
        )

    @property
    def dims(self) -> int:
        return len(self.labels)

    @cached_property
    def state_counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.labels], dtype=np.int64)

    @cached_property
    def label_table(self) -> np.ndarray:
        """Labels padded to an (n, max n_d) table; padding is NaN."""
        table = np.full((self.dims, int(self.state_counts.max())), np.nan)
        for d, states in enumerate(self.labels):
            table[d, : len(states)] = states
        return table

    @cached_property
    def prob_table(self) -> np.ndarray:
        table = np.zeros((self.dims, int(self.state_counts.max())))
        for d, probs in enumerate(self.probabilities):
            table[d, : len(probs)] = probs
        return table

    @cached_property
    def log_prob_table(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.prob_table)

    @cached_property
    def cumulative_table(self) -> np.ndarray:
        # padded columns repeat the final 1.0 so they are never selected
        cdf = np.cumsum(self.prob_table, axis=1)
        for d, k in enumerate(self.state_counts):
            cdf[d, k - 1 :] = 1.0
        return cdf

    def labels_of(self, indices: np.ndarray) -> np.ndarray:
        """Map an (N, n) matrix of state indices to state labels."""
        indices = np.asarray(indices, dtype=np.int64)
        rows = np.arange(self.dims)
        return self.label_table[rows, indices]

    def indices_of(self, states: np.ndarray) -> np.ndarray:
        """Map state labels back to state indices, row-wise."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.dims:
            raise ShapeMismatchError(f"state vectors have {states.shape[1]} entries, model has {self.dims}")
        out = np.empty(states.shape, dtype=np.int64)
        for d, labels in enumerate(self.labels):
            lookup = np.asarray(labels)
            match = states[:, d][:, None] == lookup[None, :]
            found = match.any(axis=1)
            if not found.all():
                bad = states[np.argmin(found), d]
                raise InvalidStateError(d, bad)
            out[:, d] = match.argmax(axis=1)
        return out

    def with_probabilities(self, probabilities: np.ndarray) -> "IndependentCategorical":
        """Same states, new parameters; `probabilities` is an (n, max n_d) table."""
        rows = [list(map(float, probabilities[d, :k])) for d, k in enumerate(self.state_counts)]
        return IndependentCategorical(labels=self.labels, probabilities=rows)

    def same_shape(self, other: "IndependentCategorical") -> bool:
        return self.dims == other.dims and bool(np.array_equal(self.state_counts, other.state_counts))

    @property
    def state_space_size(self) -> float:
        return float(np.prod(self.state_counts.astype(float)))


class DirichletPrior(BaseModel):
    """Per-dimension Dirichlet concentration parameters."""

    model_config = ConfigDict(frozen=True)

    concentrations: List[List[float]]

    @field_validator("concentrations")
    @classmethod
    def check_positive(cls, v: List[List[float]]) -> List[List[float]]:
        for d, theta in enumerate(v):
            if any(not (t > 0.0) for t in theta):
                raise ValueError(f"dimension {d}: Dirichlet parameters must be > 0, got {theta}")
        return v

    @cached_property
    def table(self) -> np.ndarray:
        width = max(len(t) for t in self.concentrations)
        out = np.zeros((len(self.concentrations), width))
        for d, theta in enumerate(self.concentrations):
            out[d, : len(theta)] = theta
        return out

    def check_matches(self, model: IndependentCategorical) -> None:
        counts = [len(t) for t in self.concentrations]
        if len(counts) != model.dims or counts != list(model.state_counts):
            raise ShapeMismatchError(
                f"prior shape {counts} does not match model shape {list(model.state_counts)}"
            )


class WeightedSampleBatch(BaseModel):
    """Samples of one adaptive level with their LSF values and weights."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    indices: np.ndarray
    states: np.ndarray
    lsf_values: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    normalized: bool = False

    @model_validator(mode="after")
    def check_weights(self) -> "WeightedSampleBatch":
        if self.indices.shape != self.states.shape:
            raise ValueError("indices and states must have the same shape")
        if self.weights is not None:
            if self.weights.shape != (self.size,):
                raise ValueError(f"expected {self.size} weights, got shape {self.weights.shape}")
            if np.any(self.weights < 0):
                raise ValueError("weights must be non-negative")
            if self.normalized and abs(float(np.sum(self.weights)) - self.size) > NORMALIZED_TOLERANCE:
                raise ValueError("normalized weights must sum to the batch size")
        return self

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])

    def with_weights(self, weights: np.ndarray, normalize: bool = False) -> "WeightedSampleBatch":
        weights = np.asarray(weights, dtype=float)
        if normalize:
            weights = self.size * weights / np.sum(weights)
        return WeightedSampleBatch(
            indices=self.indices,
            states=self.states,
            lsf_values=self.lsf_values,
            weights=weights,
            normalized=normalize,
        )
