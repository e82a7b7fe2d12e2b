import math

import numpy as np
import pytest
from scipy.stats import norm

from netrel.errors import SupportViolationError, UndefinedCovError
from netrel.models.categorical import IndependentCategorical, WeightedSampleBatch
from netrel.services.categorical import sample
from netrel.services.smoothing import (
    LOG_HALF,
    alternative_weights,
    auxiliary_lsf,
    convergence_check,
    log_smooth_indicator,
    sample_cov,
    sigma_floor,
    solve_sigma,
    standard_weights,
)


def test_auxiliary_lsf_clamps_failures():
    assert auxiliary_lsf(-3.2) == 0.0
    assert auxiliary_lsf(0.0) == 0.0
    assert auxiliary_lsf(4.7) == 4.7
    np.testing.assert_array_equal(auxiliary_lsf(np.array([-1.0, 2.0])), [0.0, 2.0])


def test_auxiliary_lsf_rejects_nan():
    with pytest.raises(ValueError):
        auxiliary_lsf(np.array([1.0, np.nan]))


def test_smooth_indicator_values():
    assert log_smooth_indicator(0.0, 3.0) == pytest.approx(math.log(0.5))
    assert log_smooth_indicator(1.0, 1.0) == pytest.approx(math.log(0.15865525393145707), rel=1e-12)
    deep = log_smooth_indicator(10.0, 0.5)
    assert math.isfinite(deep)
    assert deep == pytest.approx(-203.917, abs=0.01)


def test_smooth_indicator_infinite_sigma():
    np.testing.assert_array_equal(log_smooth_indicator(np.array([0.0, 5.0, 1e6]), math.inf), LOG_HALF)


def test_smooth_indicator_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        log_smooth_indicator(1.0, 0.0)


def test_smooth_indicator_finite_deep_in_tail():
    values = log_smooth_indicator(np.linspace(0.0, 40.0, 101), 1.0)
    assert np.all(np.isfinite(values))
    assert np.all(np.diff(values) < 0)


def test_standard_weights_same_reference_at_infinity(moderate_model, rng):
    batch = sample(moderate_model, rng, 20)
    g_a = rng.uniform(0, 3, size=20)
    weights = standard_weights(batch, g_a, math.inf, moderate_model, moderate_model)
    np.testing.assert_allclose(weights, 0.5)


def test_standard_weights_at_failure_boundary(moderate_model, rng):
    batch = sample(moderate_model, rng, 20)
    weights = standard_weights(batch, np.zeros(20), 1.0, moderate_model, moderate_model)
    np.testing.assert_allclose(weights, 0.5)


def _single(model, index):
    indices = np.array([[index]])
    return WeightedSampleBatch(indices=indices, states=model.labels_of(indices))


def test_standard_weight_likelihood_ratio():
    input_model = IndependentCategorical(labels=[[0, 1]], probabilities=[[0.9, 0.1]])
    ref = IndependentCategorical(labels=[[0, 1]], probabilities=[[0.8, 0.2]])
    weights = standard_weights(_single(input_model, 1), np.array([0.0]), 1.0, input_model, ref)
    assert weights[0] == pytest.approx(0.25)


def test_standard_weights_support_violation():
    input_model = IndependentCategorical(labels=[[0, 1]], probabilities=[[0.9, 0.1]])
    ref = IndependentCategorical(labels=[[0, 1]], probabilities=[[1.0, 0.0]])
    with pytest.raises(SupportViolationError):
        standard_weights(_single(input_model, 1), np.array([0.0]), 1.0, input_model, ref)


def test_alternative_weights():
    g_a = np.array([0.0, 0.5, 2.0, 7.0])
    np.testing.assert_array_equal(alternative_weights(g_a, 1.3, 1.3), np.ones(4))
    assert alternative_weights(np.array([0.0]), 0.1, 2.0)[0] == 1.0
    assert alternative_weights(np.array([2.0]), 1.0, math.inf)[0] == pytest.approx(norm.cdf(-2.0) / 0.5)
    assert alternative_weights(np.array([2.0]), 1.0, math.inf)[0] == pytest.approx(0.0455, abs=1e-4)


def test_alternative_weights_need_smaller_sigma():
    with pytest.raises(ValueError):
        alternative_weights(np.array([1.0]), 2.0, 1.0)


def test_sample_cov():
    assert sample_cov(np.full(10, 3.0)) == 0.0
    assert sample_cov(np.array([0.0, 2.0])) == pytest.approx(math.sqrt(2))
    indicator = np.zeros(100_000)
    indicator[:25_000] = 1.0
    assert sample_cov(indicator) == pytest.approx(math.sqrt(3), rel=0.02)


def test_sample_cov_undefined():
    with pytest.raises(UndefinedCovError):
        sample_cov(np.zeros(5))
    with pytest.raises(ValueError):
        sample_cov(np.array([1.0]))


def test_solve_sigma_all_failed():
    solution = solve_sigma(np.zeros(50), math.inf, 1.0)
    assert solution.converged
    assert solution.sigma == sigma_floor(np.zeros(50))


def test_solve_sigma_hits_target_on_two_point_batch():
    g_a = np.concatenate([np.zeros(10), np.full(90, 5.0)])
    solution = solve_sigma(g_a, math.inf, 1.5)
    assert solution.method == "bisection"
    assert solution.delta == pytest.approx(1.5, abs=1e-3)
    assert 0 < solution.sigma < 50.0
    check = sample_cov(alternative_weights(g_a, solution.sigma, math.inf))
    assert check == pytest.approx(solution.delta)


def test_solve_sigma_decreases_from_finite_previous():
    g_a = np.concatenate([np.zeros(30), np.linspace(0.5, 4.0, 170)])
    solution = solve_sigma(g_a, 2.0, 1.0)
    assert solution.sigma < 2.0


def test_solve_sigma_standard_mode_needs_ratio():
    with pytest.raises(ValueError):
        solve_sigma(np.array([0.0, 1.0, 2.0]), math.inf, 1.0, weight_mode="standard")


def test_solve_sigma_standard_mode_with_equal_densities():
    g_a = np.concatenate([np.zeros(10), np.full(90, 5.0)])
    standard = solve_sigma(g_a, math.inf, 1.5, "standard", log_ratio=np.zeros(100))
    alternative = solve_sigma(g_a, math.inf, 1.5, "alternative")
    assert standard.sigma == pytest.approx(alternative.sigma, rel=1e-5)


def test_solve_sigma_returns_floor_when_target_is_loose():
    g_a = np.concatenate([np.zeros(50), np.ones(50)])
    solution = solve_sigma(g_a, math.inf, 1.5)
    assert solution.method == "floor"
    assert solution.sigma == sigma_floor(g_a)
    assert solution.delta == pytest.approx(math.sqrt(100 / 99), rel=1e-6)


def test_solve_sigma_falls_back_to_minimization_without_bracket(caplog):
    g_a = np.concatenate([np.zeros(20), np.linspace(0.5, 4.0, 80)])
    log_ratio = np.zeros(100)
    log_ratio[0] = 30.0
    solution = solve_sigma(g_a, 2.0, 1.0, "standard", log_ratio=log_ratio)
    assert solution.method == "minimization"
    assert sigma_floor(g_a) <= solution.sigma < 2.0
    assert solution.delta > 1.0
    assert "bounded minimization" in caplog.text


def test_convergence_check_extremes():
    assert convergence_check(np.zeros(20), 1.0, 1.0).delta == 0.0
    none = convergence_check(np.ones(20), 1.0, 1.0)
    assert none.delta == math.inf and not none.converged


def test_convergence_check_half_failed_at_infinity():
    g_a = np.concatenate([np.zeros(50), np.ones(50)])
    check = convergence_check(g_a, math.inf, 1.01)
    assert check.delta == pytest.approx(1.0, rel=0.01)
    assert check.converged
    assert not convergence_check(g_a, math.inf, 0.99).converged
