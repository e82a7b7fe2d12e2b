"""
Network Limit-State Service
Weighted linear system performance and multi-state two-terminal max-flow limit
states, with the loaders for their problem files.
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import networkx as nx
import numpy as np
from networkx.algorithms.flow import dinitz
from pydantic import ValidationError

from netrel.errors import InvalidStateError, NetworkFileError, ShapeMismatchError
from netrel.models.categorical import IndependentCategorical
from netrel.models.problems import FlowEdge, FlowNetwork, LinearLsfSpec

logger = logging.getLogger(__name__)

HEADER_KEYS = ("nodes", "source", "sink", "demand")


def _as_state_matrix(states, dims: int) -> np.ndarray:
    try:
        arr = np.atleast_2d(np.asarray(states, dtype=float))
    except (TypeError, ValueError) as e:
        raise ValueError(f"state labels must be numeric: {e}") from e
    if arr.shape[1] != dims:
        raise ShapeMismatchError(f"state vectors have {arr.shape[1]} entries, problem has {dims} dimensions")
    bad = ~np.isfinite(arr)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise InvalidStateError(int(col), arr[row, col])
    return arr


class LinearLsf:
    """g(x) = threshold - sum_d c_d x_d."""

    def __init__(self, spec: LinearLsfSpec):
        self.spec = spec
        self.dims = spec.dims

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        arr = _as_state_matrix(states, self.dims)
        return self.spec.threshold - arr @ self.spec.vector


def linear_lsf(spec: LinearLsfSpec, x) -> float:
    return float(LinearLsf(spec).evaluate(x)[0])


def load_linear_spec(path: Union[str, Path]) -> LinearLsfSpec:
    path = Path(path)
    try:
        return LinearLsfSpec.model_validate_json(path.read_text())
    except ValidationError as e:
        raise NetworkFileError(f"invalid linear spec: {e.errors()[0]['msg']}", str(path)) from e


def _capacity(network: FlowNetwork, d: int, label: float) -> float:
    try:
        return network.edges[d].capacities[float(label)]
    except KeyError:
        raise InvalidStateError(d, label) from None


def build_flow_graph(network: FlowNetwork, x) -> nx.DiGraph:
    """
    Directed graph with one arc per directed edge, two opposed arcs per undirected
    edge; parallel arcs are merged by summing capacity.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(range(1, network.nodes + 1))
    cast = int if network.integral else float
    for d, edge in enumerate(network.edges):
        cap = cast(_capacity(network, d, x[d]))
        arcs = [(edge.tail, edge.head)] if network.directed else [(edge.tail, edge.head), (edge.head, edge.tail)]
        for u, v in arcs:
            if graph.has_edge(u, v):
                graph[u][v]["capacity"] += cap
            else:
                graph.add_edge(u, v, capacity=cap)
    return graph


def max_flow(network: FlowNetwork, x) -> float:
    """Value of the maximum source-sink flow under capacities capacity_map[x_e]."""
    graph = build_flow_graph(network, np.asarray(x, dtype=float).ravel())
    if not nx.has_path(graph, network.source, network.sink):
        return 0.0
    return float(nx.maximum_flow_value(graph, network.source, network.sink, flow_func=dinitz))


def two_terminal_lsf(network: FlowNetwork, x) -> float:
    """g(x) = max_flow - demand; failure includes flow exactly at demand."""
    return max_flow(network, x) - network.demand


class TwoTerminalLsf:
    def __init__(self, network: FlowNetwork):
        self.network = network
        self.dims = network.dims

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        arr = _as_state_matrix(states, self.dims)
        return np.array([two_terminal_lsf(self.network, row) for row in arr])


def check_capacity_coverage(network: FlowNetwork, input_model: IndependentCategorical) -> None:
    """
    Every state label of edge d's input dimension must have a capacity.

    Raises:
        ShapeMismatchError: If edge and dimension counts differ.
        InvalidStateError: If a label has no capacity.
    """
    if network.dims != input_model.dims:
        raise ShapeMismatchError(f"network has {network.dims} edges, input model {input_model.dims} dimensions")
    for d, labels in enumerate(input_model.labels):
        for label in labels:
            if float(label) not in network.edges[d].capacities:
                raise InvalidStateError(d, label)


def _parse_int(token: str, what: str, path: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise NetworkFileError(f"{what} must be an integer, got {token!r}", path, line) from None


def _parse_float(token: str, what: str, path: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise NetworkFileError(f"{what} must be a number, got {token!r}", path, line) from None


def parse_network_text(text: str, path: str = "<string>") -> FlowNetwork:
    """
    Parse the network file grammar:

        nodes 11
        source 1
        sink 11
        demand 6
        directed false
        edge <tail> <head> <label>:<capacity> [<label>:<capacity> ...]

    Blank lines and text after '#' are ignored. Edge order defines the input
    dimension order.
    """
    header: Dict[str, float] = {}
    directed = False
    edges: List[FlowEdge] = []
    edge_lines: List[int] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        key, args = tokens[0].lower(), tokens[1:]
        if key in HEADER_KEYS:
            if len(args) != 1:
                raise NetworkFileError(f"'{key}' takes exactly one value", path, lineno)
            if key in header:
                raise NetworkFileError(f"'{key}' given twice", path, lineno)
            if key == "demand":
                header[key] = _parse_float(args[0], key, path, lineno)
            else:
                header[key] = _parse_int(args[0], key, path, lineno)
        elif key == "directed":
            if len(args) != 1 or args[0].lower() not in ("true", "false"):
                raise NetworkFileError("'directed' takes true or false", path, lineno)
            directed = args[0].lower() == "true"
        elif key == "edge":
            if len(args) < 3:
                raise NetworkFileError("edge needs two endpoints and at least one label:capacity pair", path, lineno)
            tail = _parse_int(args[0], "edge endpoint", path, lineno)
            head = _parse_int(args[1], "edge endpoint", path, lineno)
            capacities: Dict[float, float] = {}
            for pair in args[2:]:
                label, sep, cap = pair.partition(":")
                if not sep:
                    raise NetworkFileError(f"expected label:capacity, got {pair!r}", path, lineno)
                label_value = _parse_float(label, "state label", path, lineno)
                if label_value in capacities:
                    raise NetworkFileError(f"state label {label} repeated", path, lineno)
                capacities[label_value] = _parse_float(cap, "capacity", path, lineno)
            try:
                edges.append(FlowEdge(tail=tail, head=head, capacities=capacities))
            except ValidationError as e:
                raise NetworkFileError(e.errors()[0]["msg"], path, lineno) from None
            edge_lines.append(lineno)
        else:
            raise NetworkFileError(f"unknown record '{tokens[0]}'", path, lineno)

    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise NetworkFileError(f"missing header record(s): {', '.join(missing)}", path)
    if not edges:
        raise NetworkFileError("no edge records", path)
    try:
        return FlowNetwork(
            nodes=int(header["nodes"]), source=int(header["source"]), sink=int(header["sink"]),
            demand=header["demand"], directed=directed, edges=edges,
        )
    except ValidationError as e:
        message = e.errors()[0]["msg"]
        line = None
        if message.startswith("Value error, edge "):
            k = int(message.split()[3])
            line = edge_lines[k - 1]
        raise NetworkFileError(message, path, line) from None


def parse_network_file(path: Union[str, Path]) -> FlowNetwork:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"network file not found: {path}")
    network = parse_network_text(path.read_text(), str(path))
    logger.info(
        f"Loaded network {path.name}: {network.nodes} nodes, {network.dims} edges, "
        f"s={network.source}, t={network.sink}, demand={network.demand:g}"
    )
    return network

