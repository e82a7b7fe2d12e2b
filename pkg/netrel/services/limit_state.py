"""
Limit-State Interface
A limit-state model maps state-label vectors to reals; failure is g(x) <= 0.
"""

from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class LimitStateModel(Protocol):
    dims: int

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        """LSF values for an (N, n) matrix of state labels."""
        ...


class CountingLsf:
    """Wraps a limit-state model and counts every row it evaluates."""

    def __init__(self, lsf: LimitStateModel):
        self.lsf = lsf
        self.dims = lsf.dims
        self.calls = 0

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        self.calls += states.shape[0]
        values = np.asarray(self.lsf.evaluate(states), dtype=float)
        if values.shape != (states.shape[0],):
            raise ValueError(f"LSF returned shape {values.shape} for {states.shape[0]} states")
        return values


class FunctionLsf:
    """Adapter for a plain per-row callable."""

    def __init__(self, func, dims: int):
        self.func = func
        self.dims = dims

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        return np.array([float(self.func(row)) for row in np.atleast_2d(states)])
