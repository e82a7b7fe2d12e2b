"""
Experiment Assembly
Loads an experiment config, builds its limit state and input model, and resolves
the reference failure probability used by replication studies.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, ValidationError

from netrel.errors import ConfigError, NonLatticeError, StateSpaceTooLargeError
from netrel.models.categorical import IndependentCategorical
from netrel.models.problems import FlowNetwork, LinearLsfSpec, PowerGrid
from netrel.models.schema import ExperimentConfig, InputModelBlock, ProblemBlock
from netrel.services.categorical import load_model
from netrel.services.config_validator import validate_experiment
from netrel.services.limit_state import LimitStateModel
from netrel.services.network_lsf import LinearLsf, TwoTerminalLsf, load_linear_spec, parse_network_file
from netrel.services.oracles import convolution_pf, enumerate_exact_pf, state_space_report
from netrel.services.power_flow import GridLsf, load_case_file
from netrel.services.replication import mcs_truth

logger = logging.getLogger(__name__)


class Experiment(BaseModel):
    """A config together with everything built from it."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ExperimentConfig
    base_dir: Path
    lsf: LimitStateModel
    input_model: IndependentCategorical
    problem: Union[LinearLsfSpec, FlowNetwork, PowerGrid]
    importance_model: Optional[IndependentCategorical] = None

    @property
    def name(self) -> str:
        return self.config.name


def load_config(path: Union[str, Path]) -> Tuple[ExperimentConfig, Path]:
    """
    Parse a JSON experiment config.

    Raises:
        ConfigError: If the file is missing, not JSON, or fails schema validation.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from e
    try:
        return ExperimentConfig.model_validate(raw), path.parent.resolve()
    except ValidationError as e:
        err = e.errors()[0]
        where = ".".join(str(p) for p in err["loc"])
        raise ConfigError(f"{path}: {where}: {err['msg']}") from e


def resolve_path(base_dir: Path, name: str) -> Path:
    path = Path(name)
    return path if path.is_absolute() else base_dir / path


def _require_file(base_dir: Path, name: str, what: str) -> Path:
    path = resolve_path(base_dir, name)
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def build_problem(block: ProblemBlock, base_dir: Path):
    """
    Returns:
        tuple: (limit-state model, parsed problem object).
    """
    if block.kind == "linear":
        if block.file is not None:
            spec = load_linear_spec(_require_file(base_dir, block.file, "linear spec file"))
        else:
            spec = LinearLsfSpec(coefficients=block.coefficients, threshold=block.threshold)
        return LinearLsf(spec), spec
    if block.kind == "maxflow":
        network = parse_network_file(_require_file(base_dir, block.file, "network file"))
        return TwoTerminalLsf(network), network
    grid = load_case_file(_require_file(base_dir, block.file, "case file"))
    return GridLsf(grid, block.load_loss_threshold), grid


def build_input_model(block: InputModelBlock, dims: int, base_dir: Path) -> IndependentCategorical:
    try:
        if block.file is not None:
            return load_model(_require_file(base_dir, block.file, "input model file"))
        if block.labels is not None:
            return IndependentCategorical(labels=block.labels, probabilities=block.probability_table)
        return IndependentCategorical.iid(block.dimensions or dims, block.states, block.probabilities)
    except ValidationError as e:
        raise ConfigError(f"input model: {e.errors()[0]['msg']}") from e


def prepare(config: ExperimentConfig, base_dir: Path) -> Experiment:
    """Build and validate everything before any sampling happens."""
    lsf, problem = build_problem(config.problem, base_dir)
    input_model = build_input_model(config.input_model, lsf.dims, base_dir)
    importance_model = None
    if config.importance_model is not None:
        importance_model = build_input_model(config.importance_model, lsf.dims, base_dir)
    experiment = Experiment(
        config=config, base_dir=base_dir, lsf=lsf, input_model=input_model,
        problem=problem, importance_model=importance_model,
    )
    validate_experiment(experiment)
    return experiment


def load_experiment(path: Union[str, Path]) -> Experiment:
    config, base_dir = load_config(path)
    return prepare(config, base_dir)


def oracle_pf(experiment: Experiment) -> Tuple[float, str]:
    """
    Exact p_f: lattice convolution for linear problems, enumeration otherwise or
    when the weighted sums are off-lattice.

    Raises:
        StateSpaceTooLargeError: If enumeration is needed but refused.
    """
    if isinstance(experiment.problem, LinearLsfSpec):
        try:
            value = convolution_pf(experiment.problem.coefficients, experiment.input_model, experiment.problem.threshold)
            return value, "convolution"
        except NonLatticeError as e:
            logger.info(f"Convolution oracle not applicable ({e}); enumerating")
    logger.info(f"Enumeration oracle: {state_space_report(experiment.input_model)}")
    return enumerate_exact_pf(experiment.lsf, experiment.input_model), "enumeration"


def read_truth_file(path: Path) -> float:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return float(data["p_f"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"truth file {path} has no readable 'p_f': {e}") from e


def resolve_true_pf(experiment: Experiment) -> float:
    """
    Reference p_f for a replication study: a number, the truth file, the exact
    oracle, or crude MCS with mcs_samples (seed base_seed + repetitions, disjoint
    from the replication seeds).

    Raises:
        ConfigError: If no usable reference can be obtained.
    """
    block = experiment.config.replication
    if block is None:
        raise ConfigError("replication block missing")
    if block.truth_file is not None:
        return read_truth_file(_require_file(experiment.base_dir, block.truth_file, "truth file"))
    if block.true_pf is None:
        raise ConfigError("replication needs true_pf (number, \"oracle\" or \"mcs\") or truth_file")
    if block.true_pf == "oracle":
        try:
            value, method = oracle_pf(experiment)
        except StateSpaceTooLargeError as e:
            raise ConfigError(f"oracle refused: {e}; use true_pf \"mcs\" instead") from e
        logger.info(f"Reference p_f by {method}: {value:.17g}")
    elif block.true_pf == "mcs":
        value, cov = mcs_truth(
            experiment.lsf, experiment.input_model, block.mcs_samples, block.base_seed + block.repetitions,
        )
        logger.info(f"Reference p_f by MCS ({block.mcs_samples} samples): {value:.6g}, c.o.v. {cov:.3g}")
    else:
        value = float(block.true_pf)
    if not value > 0:
        raise ConfigError(f"reference p_f must be > 0, got {value}")
    return value
