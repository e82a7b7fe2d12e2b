"""Shared fixtures: small models, bundled problem files and a fixed RNG."""

from pathlib import Path

import numpy as np
import pytest

from netrel.models.categorical import IndependentCategorical
from netrel.models.problems import LinearLsfSpec
from netrel.services.network_lsf import LinearLsf, load_linear_spec, parse_network_file
from netrel.services.power_flow import load_case_file

FIXTURES = Path(__file__).resolve().parent.parent / "netrel" / "fixtures"


@pytest.fixture
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def coin() -> IndependentCategorical:
    """One fair binary dimension; state 1 fails under `coin_lsf`."""
    return IndependentCategorical(labels=[[0.0, 1.0]], probabilities=[[0.5, 0.5]])


@pytest.fixture
def coin_lsf() -> LinearLsf:
    return LinearLsf(LinearLsfSpec(coefficients=[1.0], threshold=1.0))


@pytest.fixture
def moderate_model() -> IndependentCategorical:
    return IndependentCategorical.iid(10, [0, 1], [0.95, 0.05])


@pytest.fixture
def moderate_lsf() -> LinearLsf:
    """Fails when at least 5 of 10 components are in state 1 (p_f about 6e-5)."""
    return LinearLsf(LinearLsfSpec(coefficients=[1.0] * 10, threshold=5.0))


@pytest.fixture
def ex511_spec() -> LinearLsfSpec:
    return load_linear_spec(FIXTURES / "ex511_linear.json")


@pytest.fixture
def ex511_model() -> IndependentCategorical:
    return IndependentCategorical.iid(50, [0, 1], [0.999, 0.001])


@pytest.fixture
def layered_network():
    return parse_network_file(FIXTURES / "ex52_network.txt")


@pytest.fixture
def grid4():
    return load_case_file(FIXTURES / "grid4_case.txt")


@pytest.fixture
def grid3():
    return load_case_file(FIXTURES / "grid3_case.txt")
