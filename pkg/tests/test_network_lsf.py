import itertools
import math

import numpy as np
import pytest

from netrel.errors import InvalidStateError, NetworkFileError, ShapeMismatchError
from netrel.models.categorical import IndependentCategorical
from netrel.models.problems import FlowEdge, FlowNetwork
from netrel.services.network_lsf import (
    LinearLsf,
    TwoTerminalLsf,
    check_capacity_coverage,
    linear_lsf,
    max_flow,
    parse_network_file,
    parse_network_text,
    two_terminal_lsf,
)
from netrel.services.oracles import enumerate_exact_pf


def _network(nodes, edges, demand=0.0, directed=False, source=1, sink=None):
    return FlowNetwork(
        nodes=nodes, source=source, sink=sink or nodes, demand=demand, directed=directed,
        edges=[FlowEdge(tail=u, head=v, capacities=caps) for u, v, caps in edges],
    )


def _min_cut(network, x):
    """Smallest capacity over all source/sink node partitions."""
    inner = [n for n in range(1, network.nodes + 1) if n not in (network.source, network.sink)]
    best = math.inf
    for size in range(len(inner) + 1):
        for chosen in itertools.combinations(inner, size):
            side = {network.source, *chosen}
            cut = 0.0
            for d, edge in enumerate(network.edges):
                cap = edge.capacities[float(x[d])]
                if edge.tail in side and edge.head not in side:
                    cut += cap
                elif not network.directed and edge.head in side and edge.tail not in side:
                    cut += cap
            best = min(best, cut)
    return best


def test_linear_lsf_examples(ex511_spec):
    x = np.zeros(50)
    assert linear_lsf(ex511_spec, x) == 6.0
    x[:3] = 1
    assert linear_lsf(ex511_spec, x) == 0.0
    y = np.zeros(50)
    y[40:] = 1
    assert linear_lsf(ex511_spec, y) == 6.0


def test_linear_lsf_permutation_within_block(ex511_spec, rng):
    x = rng.integers(0, 2, size=50).astype(float)
    y = x.copy()
    y[:10] = rng.permutation(x[:10])
    y[10:40] = rng.permutation(x[10:40])
    assert linear_lsf(ex511_spec, x) == linear_lsf(ex511_spec, y)


def test_linear_lsf_rejects_bad_input(ex511_spec):
    lsf = LinearLsf(ex511_spec)
    with pytest.raises(ValueError):
        lsf.evaluate(np.array([["a"] * 50]))
    with pytest.raises(ShapeMismatchError):
        lsf.evaluate(np.zeros((1, 49)))
    bad = np.zeros((1, 50))
    bad[0, 7] = np.nan
    with pytest.raises(InvalidStateError) as exc:
        lsf.evaluate(bad)
    assert exc.value.dimension == 7


def test_max_flow_parallel_edges():
    network = _network(2, [(1, 2, {0: 0, 3: 3}), (1, 2, {0: 0, 5: 5})])
    assert max_flow(network, [3, 5]) == 8.0


def test_max_flow_series_edges():
    network = _network(3, [(1, 2, {0: 0, 5: 5}), (2, 3, {0: 0, 3: 3})])
    assert max_flow(network, [5, 3]) == 3.0


def test_max_flow_disconnected(layered_network):
    assert max_flow(layered_network, np.zeros(20)) == 0.0


def test_two_terminal_lsf_at_and_above_demand():
    network = _network(2, [(1, 2, {0: 0, 3: 3, 5: 5}), (1, 2, {0: 0, 3: 3, 5: 5})], demand=6)
    assert two_terminal_lsf(network, [3, 5]) == 2.0
    assert two_terminal_lsf(network, [3, 3]) == 0.0


def test_layered_network_nominal_margin(layered_network):
    assert max_flow(layered_network, np.full(20, 5.0)) == 15.0
    assert two_terminal_lsf(layered_network, np.full(20, 5.0)) == 9.0


def test_layered_network_cut_fails(layered_network):
    x = np.full(20, 5.0)
    x[[17, 18, 19]] = [0, 3, 3]
    assert two_terminal_lsf(layered_network, x) == 0.0


def test_directed_edges_carry_one_way():
    forward = _network(2, [(1, 2, {1: 4})], directed=True)
    backward = _network(2, [(2, 1, {1: 4})], directed=True)
    assert max_flow(forward, [1]) == 4.0
    assert max_flow(backward, [1]) == 0.0


def test_unknown_capacity_label(layered_network):
    x = np.full(20, 5.0)
    x[4] = 4.0
    with pytest.raises(InvalidStateError) as exc:
        max_flow(layered_network, x)
    assert exc.value.dimension == 4


def _random_network(gen, nodes, edges, directed):
    pairs = []
    while len(pairs) < edges:
        u, v = (int(a) for a in gen.choice(np.arange(1, nodes + 1), size=2, replace=False))
        pairs.append((u, v, {0: 0.0, 1: float(gen.integers(1, 6)), 2: float(gen.integers(6, 11))}))
    return _network(nodes, pairs, directed=directed)


@pytest.mark.parametrize("directed", [False, True])
def test_max_flow_equals_min_cut(directed):
    gen = np.random.default_rng(2024)
    for _ in range(40):
        network = _random_network(gen, int(gen.integers(3, 7)), int(gen.integers(3, 13)), directed)
        x = gen.integers(0, 3, size=network.dims)
        assert max_flow(network, x) == pytest.approx(_min_cut(network, x))


def test_max_flow_monotone_in_capacity():
    gen = np.random.default_rng(77)
    for _ in range(60):
        network = _random_network(gen, 6, 10, False)
        x = gen.integers(0, 3, size=10)
        d = int(gen.integers(0, 10))
        if x[d] == 2:
            continue
        raised = x.copy()
        raised[d] += 1
        assert max_flow(network, raised) >= max_flow(network, x)


def test_enumerated_pf_matches_cut_enumeration():
    gen = np.random.default_rng(3)
    network = _random_network(gen, 5, 8, False)
    network = network.model_copy(update={"demand": 4.0})
    model = IndependentCategorical.iid(8, [0, 1, 2], [0.1, 0.3, 0.6])
    expected = math.fsum(
        math.prod(model.probabilities[d][s] for d, s in enumerate(x))
        for x in itertools.product(range(3), repeat=8)
        if _min_cut(network, x) - 4.0 <= 0
    )
    assert enumerate_exact_pf(TwoTerminalLsf(network), model) == pytest.approx(expected, abs=1e-12)


def test_parse_bundled_network(layered_network):
    assert layered_network.nodes == 11
    assert layered_network.dims == 20
    assert layered_network.demand == 6.0
    assert not layered_network.directed
    assert layered_network.edges[13].tail == 7 and layered_network.edges[13].head == 10


NETWORK = """\
nodes 3
source 1
sink 3
demand 2   # units
edge 1 2 0:0 1:4
edge 2 3 0:0 1:4
"""


def test_parse_network_text_with_comments():
    network = parse_network_text(NETWORK)
    assert network.dims == 2
    assert network.edges[0].capacities == {0.0: 0.0, 1.0: 4.0}


def test_parse_reports_line_of_bad_record():
    text = NETWORK.replace("edge 2 3 0:0 1:4", "edge 2 3 0:0 1=4")
    with pytest.raises(NetworkFileError) as exc:
        parse_network_text(text, "net.txt")
    assert exc.value.line == 6
    assert str(exc.value).startswith("net.txt:6:")


def test_parse_reports_line_of_bad_endpoint():
    text = NETWORK.replace("edge 2 3", "edge 2 9")
    with pytest.raises(NetworkFileError) as exc:
        parse_network_text(text)
    assert exc.value.line == 6


def test_parse_missing_header():
    with pytest.raises(NetworkFileError, match="sink"):
        parse_network_text(NETWORK.replace("sink 3\n", ""))


def test_parse_unknown_record():
    with pytest.raises(NetworkFileError) as exc:
        parse_network_text(NETWORK + "vertex 4\n")
    assert exc.value.line == 7


def test_parse_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_network_file(tmp_path / "absent.txt")


def test_capacity_coverage(layered_network):
    check_capacity_coverage(layered_network, IndependentCategorical.iid(20, [0, 3, 5], [0.001, 0.1, 0.899]))
    with pytest.raises(InvalidStateError):
        check_capacity_coverage(layered_network, IndependentCategorical.iid(20, [0, 4], [0.5, 0.5]))
    with pytest.raises(ShapeMismatchError):
        check_capacity_coverage(layered_network, IndependentCategorical.iid(19, [0, 3], [0.5, 0.5]))
