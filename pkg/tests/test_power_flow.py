import itertools
import json

import numpy as np
import pytest

from netrel.errors import CaseFileError, InvalidStateError, ShapeMismatchError
from netrel.models.problems import Branch, Bus, PowerGrid
from netrel.services.power_flow import (
    GridLsf,
    balance_islands,
    cascade,
    dclf_solve,
    dump_cascade,
    grid_lsf,
    islands,
    load_case_file,
    parse_case_text,
    parse_matpower_text,
)

# Load-loss fraction of the 4-bus grid for each set of initially failed branches.
GRID4_LOSS = {
    (): 0.0,
    (0,): 0.3, (1,): 0.0, (2,): 0.7, (3,): 0.5,
    (0, 1): 0.3, (0, 2): 1.0, (0, 3): 0.8, (1, 2): 0.7, (1, 3): 0.5, (2, 3): 0.7,
    (0, 1, 2): 1.0, (0, 1, 3): 0.8, (0, 2, 3): 1.0, (1, 2, 3): 0.7,
    (0, 1, 2, 3): 1.0,
}


def _states(failed, dims=4):
    x = np.ones(dims)
    x[list(failed)] = 0
    return x


def _two_bus(load=100.0):
    return PowerGrid(
        buses=[Bus(id=1, kind="slack", generation=load), Bus(id=2, kind="load", demand=load)],
        branches=[Branch(from_bus=1, to_bus=2, reactance=0.1, capacity=1000.0)],
    )


def test_two_bus_flow():
    flows = dclf_solve(_two_bus(), np.array([True]))
    assert flows[0] == pytest.approx(100.0)


def test_three_bus_flows(grid3):
    flows = dclf_solve(grid3, np.ones(3, dtype=bool))
    np.testing.assert_allclose(flows, [50.0, 40.0, -10.0], atol=1e-10)


def test_symmetric_ring_has_no_cross_flow():
    grid = PowerGrid(
        buses=[
            Bus(id=1, kind="slack", generation=90), Bus(id=2, kind="load", demand=45),
            Bus(id=3, kind="load", demand=45),
        ],
        branches=[Branch(from_bus=a, to_bus=b, reactance=0.1, capacity=100) for a, b in ((1, 2), (1, 3), (2, 3))],
    )
    np.testing.assert_allclose(dclf_solve(grid, np.ones(3, dtype=bool)), [45.0, 45.0, 0.0], atol=1e-10)


def test_uniform_reactance_scaling_keeps_flows(grid3):
    doubled = grid3.model_copy(update={
        "branches": [b.model_copy(update={"reactance": 2 * b.reactance}) for b in grid3.branches],
    })
    active = np.ones(3, dtype=bool)
    np.testing.assert_allclose(dclf_solve(doubled, active), dclf_solve(grid3, active), atol=1e-10)


def _random_grid(gen, size):
    buses = [Bus(id=1, kind="slack", generation=0.0)]
    for i in range(2, size + 1):
        if gen.random() < 0.3:
            buses.append(Bus(id=i, kind="generator", generation=float(gen.uniform(20, 80))))
        else:
            buses.append(Bus(id=i, kind="load", demand=float(gen.uniform(10, 100))))
    total = sum(b.demand for b in buses)
    buses[0] = Bus(id=1, kind="slack", generation=1.2 * total + 1.0)
    pairs = [(int(gen.integers(1, i)), i) for i in range(2, size + 1)]
    for _ in range(size // 2):
        a, b = (int(v) for v in gen.choice(np.arange(1, size + 1), size=2, replace=False))
        pairs.append((a, b))
    branches = [
        Branch(from_bus=a, to_bus=b, reactance=float(gen.uniform(0.05, 0.5)), capacity=1e6) for a, b in pairs
    ]
    return PowerGrid(buses=buses, branches=branches)


def test_flow_conservation_on_random_grids():
    gen = np.random.default_rng(99)
    for _ in range(100):
        grid = _random_grid(gen, int(gen.integers(4, 9)))
        active = np.ones(grid.dims, dtype=bool)
        _, injections = balance_islands(grid, active)
        flows = dclf_solve(grid, active, injections)
        net = np.zeros(len(grid.buses))
        for flow, br in zip(flows, grid.branches):
            net[grid.bus_index[br.from_bus]] += flow
            net[grid.bus_index[br.to_bus]] -= flow
        assert np.max(np.abs(net - injections)) / grid.base_mva < 1e-8
        assert abs(injections.sum()) < 1e-8


def test_islands_split_on_outage(grid4):
    assert islands(grid4, np.array([True, False, True, True])) == [[0, 1, 2, 3]]
    assert islands(grid4, np.array([False, False, True, True])) == [[0, 2, 3], [1]]


def test_cascade_nominal(grid4):
    result = cascade(grid4, np.ones(4))
    assert result.load_loss_fraction == 0.0
    assert result.iterations == 1
    np.testing.assert_allclose(result.flows, [105.0, 45.0, 95.0, 55.0], atol=1e-9)


def test_cascade_trace_after_first_branch_outage(grid4):
    result = cascade(grid4, _states([0]))
    assert result.iterations == 2
    assert result.removed_per_iteration == [[1]]
    assert result.surviving == [2, 3]
    assert result.load_loss_fraction == pytest.approx(0.3)
    assert grid_lsf(grid4, _states([0])) == pytest.approx(0.0, abs=1e-12)


def test_cascade_generator_isolated(grid4):
    assert cascade(grid4, _states([0, 2])).load_loss_fraction == 1.0


def test_cascade_everything_failed(grid4):
    result = cascade(grid4, np.zeros(4))
    assert result.iterations == 0
    assert result.load_loss_fraction == 1.0
    assert result.flows == [0.0, 0.0, 0.0, 0.0]


def test_cascade_exhaustive_grid4(grid4):
    capacity = np.array([b.capacity for b in grid4.branches])
    for failed, expected in GRID4_LOSS.items():
        result = cascade(grid4, _states(failed))
        assert result.load_loss_fraction == pytest.approx(expected, abs=1e-12), failed
        assert result.iterations <= grid4.dims
        assert np.all(np.abs(result.flows) <= capacity * (1 + 1e-9))


def test_load_loss_monotone_in_outages(grid4):
    for failed in GRID4_LOSS:
        for extra in range(4):
            if extra in failed:
                continue
            bigger = tuple(sorted(failed + (extra,)))
            assert GRID4_LOSS[bigger] >= GRID4_LOSS[failed]
            assert (
                cascade(grid4, _states(bigger)).load_loss_fraction
                >= cascade(grid4, _states(failed)).load_loss_fraction - 1e-12
            )


def test_cascade_independent_of_branch_order(grid4):
    order = [2, 0, 3, 1]
    shuffled = grid4.model_copy(update={"branches": [grid4.branches[k] for k in order]})
    for failed in itertools.chain.from_iterable(itertools.combinations(range(4), r) for r in range(5)):
        x = _states(failed)
        assert cascade(shuffled, x[order]).load_loss_fraction == pytest.approx(
            cascade(grid4, x).load_loss_fraction, abs=1e-12
        )


def test_grid_lsf_values(grid4):
    assert grid_lsf(grid4, np.ones(4)) == pytest.approx(0.3)
    assert grid_lsf(grid4, np.zeros(4)) == pytest.approx(-0.7)
    values = GridLsf(grid4).evaluate(np.array([np.ones(4), _states([2])]))
    np.testing.assert_allclose(values, [0.3, -0.4])


def test_cascade_rejects_bad_states(grid4):
    with pytest.raises(ShapeMismatchError):
        cascade(grid4, np.ones(3))
    with pytest.raises(InvalidStateError):
        cascade(grid4, np.array([1, 2, 1, 1]))


def test_case_text_errors():
    good = "bus 1 slack 0 100\nbus 2 load 100 0\nbranch 1 2 0.1 200\n"
    assert parse_case_text(good).dims == 1
    with pytest.raises(CaseFileError) as exc:
        parse_case_text(good.replace("0.1", "0.0"), "case.txt")
    assert exc.value.line == 3
    with pytest.raises(CaseFileError) as exc:
        parse_case_text(good.replace("bus 2 load 100 0", "bus 2 load lots 0"))
    assert exc.value.line == 2
    with pytest.raises(CaseFileError):
        parse_case_text(good.replace("slack 0 100", "slack 0 50"))
    with pytest.raises(CaseFileError):
        parse_case_text(good.replace("branch 1 2", "branch 1 7"))


MATPOWER = """\
function mpc = case3
mpc.baseMVA = 100;
mpc.bus = [
    1   3   0    0   0   0   1   1   0   345   1   1.1   0.9;
    2   2   20   0   0   0   1   1   0   345   1   1.1   0.9;
    3   1   90   0   0   0   1   1   0   345   1   1.1   0.9;
];
mpc.gen = [
    1   0    0   300  -300   1   100   1   250   0;
    2   30   0   300  -300   1   100   1   60    0;
];
mpc.branch = [
    1   2   0.01   0.1    0   150   150   150   0   0   1   -360   360;
    1   3   0.01   0.2    0   0     0     0     0   0   1   -360   360;
    2   3   0.01   0.15   0   80    80    80    0   0   0   -360   360;
];
"""


def test_parse_matpower_case():
    grid = parse_matpower_text(MATPOWER, "case3.m")
    kinds = {b.id: b.kind for b in grid.buses}
    assert kinds == {1: "slack", 2: "generator", 3: "load"}
    assert grid.buses[0].generation == 250.0
    assert grid.buses[1].generation == 30.0
    assert grid.total_demand == 110.0
    assert grid.dims == 2
    assert grid.branches[0].capacity == 150.0
    assert grid.branches[1].capacity == float("inf")
    assert grid.branches[1].reactance == 0.2


def test_load_case_file_picks_matpower_parser(tmp_path):
    path = tmp_path / "case3.m"
    path.write_text(MATPOWER)
    assert load_case_file(path).dims == 2
    with pytest.raises(FileNotFoundError):
        load_case_file(tmp_path / "missing.txt")


def test_dump_cascade(grid4, tmp_path):
    path = tmp_path / "cascade.json"
    dump_cascade(cascade(grid4, _states([0])), path)
    data = json.loads(path.read_text())
    assert data["load_loss_fraction"] == pytest.approx(0.3)
    assert data["failed_initially"] == [0]
