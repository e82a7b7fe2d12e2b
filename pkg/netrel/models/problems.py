"""
Problem Schemas
Pydantic models for the benchmark limit states: weighted linear sums, multi-state
flow networks and DC power grids, plus the cascade equilibrium record.
"""

import math
from functools import cached_property
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

BALANCE_TOLERANCE = 1e-9


class LinearLsfSpec(BaseModel):
    """Failure iff sum_d c_d x_d >= threshold."""

    model_config = ConfigDict(frozen=True)

    coefficients: List[float] = Field(..., min_length=1)
    threshold: float

    @field_validator("coefficients")
    @classmethod
    def check_finite(cls, v: List[float]) -> List[float]:
        if not all(math.isfinite(c) for c in v):
            raise ValueError("coefficients must be finite")
        return v

    @property
    def dims(self) -> int:
        return len(self.coefficients)

    @cached_property
    def vector(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)


class FlowEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    tail: int
    head: int
    capacities: Dict[float, float] = Field(..., description="State label -> capacity")

    @field_validator("capacities")
    @classmethod
    def check_capacities(cls, v: Dict[float, float]) -> Dict[float, float]:
        if not v:
            raise ValueError("edge needs at least one state:capacity pair")
        if any(not (c >= 0 and math.isfinite(c)) for c in v.values()):
            raise ValueError(f"capacities must be finite and >= 0, got {sorted(v.values())}")
        return v


class FlowNetwork(BaseModel):
    """Multi-state two-terminal network; edge d is input dimension d."""

    model_config = ConfigDict(frozen=True)

    nodes: int = Field(..., ge=2)
    source: int
    sink: int
    demand: float = Field(..., ge=0)
    directed: bool = False
    edges: List[FlowEdge] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_topology(self) -> "FlowNetwork":
        if self.source == self.sink:
            raise ValueError(f"source and sink are both node {self.source}")
        for name, node in (("source", self.source), ("sink", self.sink)):
            if not 1 <= node <= self.nodes:
                raise ValueError(f"{name} {node} outside nodes 1..{self.nodes}")
        for k, edge in enumerate(self.edges):
            for node in (edge.tail, edge.head):
                if not 1 <= node <= self.nodes:
                    raise ValueError(f"edge {k + 1} endpoint {node} outside nodes 1..{self.nodes}")
            if edge.tail == edge.head:
                raise ValueError(f"edge {k + 1} is a self-loop on node {edge.tail}")
        return self

    @property
    def dims(self) -> int:
        return len(self.edges)

    @cached_property
    def integral(self) -> bool:
        return all(float(c).is_integer() for e in self.edges for c in e.capacities.values())


class Bus(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    kind: Literal["slack", "generator", "load"]
    demand: float = Field(default=0.0, ge=0, description="MW")
    generation: float = Field(default=0.0, ge=0, description="Available generation, MW")


class Branch(BaseModel):
    model_config = ConfigDict(frozen=True)

    from_bus: int
    to_bus: int
    reactance: float = Field(..., gt=0, description="p.u.")
    capacity: float = Field(..., gt=0, description="MW")


class PowerGrid(BaseModel):
    """Buses and branches of a DC network; branch d is input dimension d."""

    model_config = ConfigDict(frozen=True)

    base_mva: float = Field(default=100.0, gt=0)
    buses: List[Bus] = Field(..., min_length=1)
    branches: List[Branch] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_grid(self) -> "PowerGrid":
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bus ids")
        slack = [b.id for b in self.buses if b.kind == "slack"]
        if len(slack) != 1:
            raise ValueError(f"exactly one slack bus required, found {len(slack)}")
        known = set(ids)
        for k, br in enumerate(self.branches):
            if br.from_bus not in known or br.to_bus not in known:
                raise ValueError(f"branch {k + 1} ({br.from_bus}-{br.to_bus}) references an unknown bus")
            if br.from_bus == br.to_bus:
                raise ValueError(f"branch {k + 1} is a self-loop on bus {br.from_bus}")
        demand = sum(b.demand for b in self.buses)
        generation = sum(b.generation for b in self.buses)
        if generation < demand * (1 - BALANCE_TOLERANCE):
            raise ValueError(
                f"generation {generation:.6g} MW cannot cover demand {demand:.6g} MW even with slack balancing"
            )
        return self

    @property
    def dims(self) -> int:
        return len(self.branches)

    @cached_property
    def bus_index(self) -> Dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def slack_bus(self) -> int:
        return next(b.id for b in self.buses if b.kind == "slack")

    @cached_property
    def total_demand(self) -> float:
        return math.fsum(b.demand for b in self.buses)

    def summary(self) -> Dict[str, int]:
        return {
            "buses": len(self.buses),
            "branches": len(self.branches),
            "generators": sum(1 for b in self.buses if b.generation > 0),
            "load_buses": sum(1 for b in self.buses if b.demand > 0),
        }


class IslandBalance(BaseModel):
    buses: List[int]
    demand: float
    served: float
    generation: float


class CascadeResult(BaseModel):
    surviving: List[int] = Field(..., description="Indices of branches in service at equilibrium")
    flows: List[float] = Field(..., description="Final MW flow per branch, 0 for removed branches")
    islands: List[IslandBalance] = Field(default_factory=list)
    load_loss_fraction: float = Field(..., ge=0, le=1)
    iterations: int = Field(..., ge=0)
    removed_per_iteration: List[List[int]] = Field(default_factory=list)
    failed_initially: Optional[List[int]] = None
