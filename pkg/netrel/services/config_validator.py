"""
Experiment Validator
Fail-fast consistency checks between problem, input model and estimator settings.
Runs before any limit-state evaluation.
"""

import logging

from netrel.errors import ConfigError, InvalidStateError, ShapeMismatchError
from netrel.models.problems import FlowNetwork, PowerGrid
from netrel.services.network_lsf import check_capacity_coverage

logger = logging.getLogger(__name__)


def validate_experiment(experiment) -> None:
    """
    Raises:
        ConfigError: On the first inconsistency found.
    """
    config = experiment.config
    model = experiment.input_model
    problem = experiment.problem

    if experiment.lsf.dims != model.dims:
        raise ConfigError(
            f"{config.problem.kind} problem has {experiment.lsf.dims} dimensions, "
            f"input model has {model.dims}"
        )

    if isinstance(problem, FlowNetwork):
        try:
            check_capacity_coverage(problem, model)
        except (InvalidStateError, ShapeMismatchError) as e:
            raise ConfigError(f"network capacities do not cover the input states: {e}") from e

    if isinstance(problem, PowerGrid):
        for d, labels in enumerate(model.labels):
            if sorted(labels) != [0.0, 1.0]:
                raise ConfigError(f"branch {d + 1} must have states {{0, 1}} (failed, in service), got {labels}")

    if config.estimator.method == "is":
        if experiment.importance_model is None:
            raise ConfigError("method 'is' needs an importance_model block")
        if not experiment.importance_model.same_shape(model):
            raise ConfigError("importance_model layout differs from input_model")

    replication = config.replication
    if replication is not None:
        if replication.sample_sizes and min(replication.sample_sizes) < 2:
            raise ConfigError("replication.sample_sizes entries must be >= 2")
        if replication.prior_strengths and min(replication.prior_strengths) <= 0:
            raise ConfigError("replication.prior_strengths entries must be > 0")

    logger.info(
        f"Validated experiment '{config.name}': {config.problem.kind}, {model.dims} dimensions, "
        f"{model.state_space_size:.3g} states, method {config.estimator.method}"
    )
