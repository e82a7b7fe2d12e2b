"""
DC Power Flow Service
DC load flow per island, the cascading-failure equilibrium with simultaneous
removal of overloaded branches, the grid limit state, and case file loading
(native bus/branch tables and MATPOWER .m cases).
"""

import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import ValidationError
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from netrel.errors import CaseFileError, InvalidStateError, PowerFlowSingularError, ShapeMismatchError
from netrel.models.problems import Branch, Bus, CascadeResult, IslandBalance, PowerGrid

logger = logging.getLogger(__name__)

OVERLOAD_TOLERANCE = 1e-9
RESIDUAL_TOLERANCE = 1e-10
DEFAULT_LOAD_LOSS_THRESHOLD = 0.30


def islands(grid: PowerGrid, active: np.ndarray) -> List[List[int]]:
    """Connected components (bus indices) over the active branches, sorted."""
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(len(grid.buses)))
    index = grid.bus_index
    for k in np.flatnonzero(active):
        br = grid.branches[k]
        graph.add_edge(index[br.from_bus], index[br.to_bus])
    return sorted(sorted(c) for c in nx.connected_components(graph))


def balance_islands(grid: PowerGrid, active: np.ndarray) -> Tuple[List[IslandBalance], np.ndarray]:
    """
    Balance each island: surplus generation is scaled down pro-rata to meet demand,
    a deficit sheds load pro-rata, an island without generation serves nothing.

    Returns:
        tuple: (island balances, per-bus MW injections, generation positive).
    """
    injections = np.zeros(len(grid.buses))
    balances = []
    for component in islands(grid, active):
        demand = math.fsum(grid.buses[i].demand for i in component)
        generation = math.fsum(grid.buses[i].generation for i in component)
        served = min(demand, generation)
        gen_scale = served / generation if generation > 0 else 0.0
        load_scale = served / demand if demand > 0 else 0.0
        for i in component:
            bus = grid.buses[i]
            injections[i] = bus.generation * gen_scale - bus.demand * load_scale
        balances.append(IslandBalance(
            buses=[grid.buses[i].id for i in component], demand=demand, served=served, generation=generation,
        ))
    return balances, injections


def _reference_bus(grid: PowerGrid, component: Sequence[int]) -> int:
    slack = grid.bus_index[grid.slack_bus]
    if slack in component:
        return slack
    return max(component, key=lambda i: (grid.buses[i].generation, -i))


def dclf_solve(grid: PowerGrid, active: np.ndarray, injections: Optional[np.ndarray] = None) -> np.ndarray:
    """
    DC load flow on every island with a nonzero injection.

    Each island's reduced susceptance system B' theta = P (reference bus angle 0)
    is solved by Cholesky factorization. Flows are (theta_from - theta_to) / x.

    Args:
        active (np.ndarray): Boolean mask of in-service branches.
        injections (np.ndarray, optional): Balanced MW injection per bus; defaults
            to the pro-rata balance of each island.

    Returns:
        np.ndarray: MW flow per branch (from -> to positive), 0 on inactive branches.

    Raises:
        PowerFlowSingularError: If a reduced system cannot be factorized or its
            residual exceeds tolerance.
    """
    active = np.asarray(active, dtype=bool)
    if active.shape != (grid.dims,):
        raise ShapeMismatchError(f"{active.size} branch states for {grid.dims} branches")
    if injections is None:
        _, injections = balance_islands(grid, active)
    injections_pu = np.asarray(injections, dtype=float) / grid.base_mva
    index = grid.bus_index
    ends = [(index[br.from_bus], index[br.to_bus]) for br in grid.branches]
    theta = np.zeros(len(grid.buses))

    for component in islands(grid, active):
        if len(component) < 2 or not np.any(injections_pu[component]):
            continue
        position = {bus: k for k, bus in enumerate(component)}
        size = len(component)
        b_matrix = np.zeros((size, size))
        for k in np.flatnonzero(active):
            f, t = ends[k]
            if f not in position:
                continue
            b = 1.0 / grid.branches[k].reactance
            i, j = position[f], position[t]
            b_matrix[i, i] += b
            b_matrix[j, j] += b
            b_matrix[i, j] -= b
            b_matrix[j, i] -= b
        ref = position[_reference_bus(grid, component)]
        keep = [k for k in range(size) if k != ref]
        reduced = b_matrix[np.ix_(keep, keep)]
        rhs = injections_pu[[component[k] for k in keep]]
        try:
            angles = cho_solve(cho_factor(reduced), rhs)
        except LinAlgError as e:
            raise PowerFlowSingularError(f"island {[grid.buses[i].id for i in component]}: {e}") from e
        residual = float(np.max(np.abs(reduced @ angles - rhs)))
        if residual > RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(rhs)))):
            raise PowerFlowSingularError(f"DCLF residual {residual:.3g} p.u. exceeds tolerance")
        for k, angle in zip(keep, angles):
            theta[component[k]] = angle

    flows = np.zeros(grid.dims)
    for k in np.flatnonzero(active):
        f, t = ends[k]
        flows[k] = (theta[f] - theta[t]) / grid.branches[k].reactance * grid.base_mva
    return flows


def cascade(grid: PowerGrid, initial_states) -> CascadeResult:
    """
    Run the overload cascade to equilibrium.

    Each iteration balances the islands, solves the DC load flow and removes every
    branch whose |flow| exceeds its capacity at once. A branch at exactly its
    rating survives.

    Args:
        initial_states: Binary vector, 0 = branch failed, 1 = in service.
    """
    states = np.asarray(initial_states, dtype=float).ravel()
    if states.shape != (grid.dims,):
        raise ShapeMismatchError(f"{states.size} branch states for {grid.dims} branches")
    invalid = np.flatnonzero((states != 0) & (states != 1))
    if invalid.size:
        raise InvalidStateError(int(invalid[0]), states[invalid[0]])

    active = states == 1
    capacity = np.array([br.capacity for br in grid.branches])
    removed: List[List[int]] = []
    iterations = 0
    flows = np.zeros(grid.dims)
    while active.any():
        iterations += 1
        flows = dclf_solve(grid, active)
        overloaded = active & (np.abs(flows) > capacity * (1 + OVERLOAD_TOLERANCE))
        if not overloaded.any():
            break
        removed.append(np.flatnonzero(overloaded).tolist())
        logger.debug(f"cascade iteration {iterations}: removing branches {removed[-1]}")
        active &= ~overloaded
    if not active.any():
        flows = np.zeros(grid.dims)

    balances, _ = balance_islands(grid, active)
    total = grid.total_demand
    served = math.fsum(b.served for b in balances)
    loss = 0.0 if total <= 0 else min(max(1.0 - served / total, 0.0), 1.0)
    return CascadeResult(
        surviving=np.flatnonzero(active).tolist(),
        flows=flows.tolist(),
        islands=balances,
        load_loss_fraction=loss,
        iterations=iterations,
        removed_per_iteration=removed,
        failed_initially=np.flatnonzero(states == 0).tolist(),
    )


def grid_lsf(grid: PowerGrid, x, threshold: float = DEFAULT_LOAD_LOSS_THRESHOLD) -> float:
    """g(x) = threshold - L(x); failure includes load loss exactly at the threshold."""
    return threshold - cascade(grid, x).load_loss_fraction


class GridLsf:
    def __init__(self, grid: PowerGrid, threshold: float = DEFAULT_LOAD_LOSS_THRESHOLD):
        self.grid = grid
        self.threshold = threshold
        self.dims = grid.dims

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.dims:
            raise ShapeMismatchError(f"state vectors have {states.shape[1]} entries, grid has {self.dims} branches")
        return np.array([grid_lsf(self.grid, row, self.threshold) for row in states])


def _grid_or_error(base_mva: float, buses: List[Bus], branches: List[Branch], path: str) -> PowerGrid:
    try:
        return PowerGrid(base_mva=base_mva, buses=buses, branches=branches)
    except ValidationError as e:
        raise CaseFileError(e.errors()[0]["msg"], path) from None


def _record(model, path: str, line: int, **fields):
    try:
        return model(**fields)
    except ValidationError as e:
        err = e.errors()[0]
        where = ".".join(str(p) for p in err["loc"])
        raise CaseFileError(f"{where}: {err['msg']}", path, line) from None


def parse_case_text(text: str, path: str = "<string>") -> PowerGrid:
    """
    Parse the native case grammar:

        base_mva 100
        bus <id> <slack|generator|load> <demand MW> <generation MW>
        branch <from> <to> <reactance p.u.> <rating MW>

    Blank lines and text after '#' are ignored. Branch order defines the input
    dimension order.
    """
    base_mva = 100.0
    buses: List[Bus] = []
    branches: List[Branch] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        key, args = tokens[0].lower(), tokens[1:]
        try:
            if key == "base_mva" and len(args) == 1:
                base_mva = float(args[0])
            elif key == "bus" and len(args) == 4:
                buses.append(_record(
                    Bus, path, lineno, id=int(args[0]), kind=args[1].lower(),
                    demand=float(args[2]), generation=float(args[3]),
                ))
            elif key == "branch" and len(args) == 4:
                branches.append(_record(
                    Branch, path, lineno, from_bus=int(args[0]), to_bus=int(args[1]),
                    reactance=float(args[2]), capacity=float(args[3]),
                ))
            else:
                raise CaseFileError(f"malformed record: {raw.strip()!r}", path, lineno)
        except ValueError as e:
            if isinstance(e, CaseFileError):
                raise
            raise CaseFileError(f"bad number in {raw.strip()!r}: {e}", path, lineno) from None
    if not buses or not branches:
        raise CaseFileError("case needs at least one bus and one branch record", path)
    return _grid_or_error(base_mva, buses, branches, path)


_MATRIX = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR = re.compile(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)\s*;")


def _matrix_rows(text: str, name: str, path: str) -> List[Tuple[int, List[float]]]:
    for match in _MATRIX.finditer(text):
        if match.group(1) != name:
            continue
        first_line = text.count("\n", 0, match.start(2)) + 1
        rows = []
        for offset, raw in enumerate(match.group(2).split("\n")):
            for chunk in raw.split("%", 1)[0].split(";"):
                tokens = chunk.replace(",", " ").split()
                if not tokens:
                    continue
                try:
                    rows.append((first_line + offset, [float(t) for t in tokens]))
                except ValueError:
                    raise CaseFileError(f"non-numeric entry in mpc.{name}", path, first_line + offset) from None
        return rows
    raise CaseFileError(f"mpc.{name} matrix not found", path)


def parse_matpower_text(text: str, path: str = "<string>") -> PowerGrid:
    """
    Read a MATPOWER case: bus type 3 is the slack, generation per bus is the sum
    of in-service PG (PMAX for the slack, which absorbs imbalance), branch rating
    is RATE_A (0 means unlimited). Out-of-service branches are dropped.
    """
    scalar = _SCALAR.search(text)
    base_mva = float(scalar.group(1)) if scalar else 100.0
    generation: Dict[int, float] = {}
    pmax: Dict[int, float] = {}
    for lineno, row in _matrix_rows(text, "gen", path):
        if len(row) < 10:
            raise CaseFileError(f"gen row has {len(row)} columns, need 10", path, lineno)
        if row[7] <= 0:
            continue
        bus_id = int(row[0])
        generation[bus_id] = generation.get(bus_id, 0.0) + max(row[1], 0.0)
        pmax[bus_id] = pmax.get(bus_id, 0.0) + max(row[8], 0.0)

    buses: List[Bus] = []
    for lineno, row in _matrix_rows(text, "bus", path):
        if len(row) < 3:
            raise CaseFileError(f"bus row has {len(row)} columns, need at least 3", path, lineno)
        bus_id, bus_type = int(row[0]), int(row[1])
        if bus_type == 3:
            kind, gen = "slack", max(generation.get(bus_id, 0.0), pmax.get(bus_id, 0.0))
        elif bus_id in generation:
            kind, gen = "generator", generation[bus_id]
        else:
            kind, gen = "load", 0.0
        buses.append(_record(Bus, path, lineno, id=bus_id, kind=kind, demand=row[2], generation=gen))

    branches: List[Branch] = []
    unlimited = 0
    for lineno, row in _matrix_rows(text, "branch", path):
        if len(row) < 11:
            raise CaseFileError(f"branch row has {len(row)} columns, need 11", path, lineno)
        if row[10] <= 0:
            continue
        rating = row[5] if row[5] > 0 else math.inf
        unlimited += rating == math.inf
        branches.append(_record(
            Branch, path, lineno, from_bus=int(row[0]), to_bus=int(row[1]), reactance=row[3], capacity=rating,
        ))
    if unlimited:
        logger.warning(f"{path}: {unlimited} branch(es) with RATE_A = 0 treated as unlimited")
    return _grid_or_error(base_mva, buses, branches, path)


def load_case_file(path: Union[str, Path]) -> PowerGrid:
    """Load a native (.txt/.case) or MATPOWER (.m) case file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"case file not found: {path}")
    text = path.read_text()
    if path.suffix == ".m" or "mpc." in text:
        grid = parse_matpower_text(text, str(path))
    else:
        grid = parse_case_text(text, str(path))
    logger.info(f"Loaded case {path.name}: {grid.summary()}")
    return grid


def dump_cascade(result: CascadeResult, path: Union[str, Path]) -> None:
    Path(path).write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
