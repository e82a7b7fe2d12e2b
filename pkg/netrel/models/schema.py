"""
Estimator, Report and Experiment Schemas
Pydantic models for estimator settings, run reports, replication summaries and
the JSON experiment configuration driven by the CLI.
"""

from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from netrel.models.categorical import IndependentCategorical

Method = Literal["mcs", "is", "ce", "ice", "bice"]


class EstimatorConfig(BaseModel):
    """Settings shared by all estimators; unused fields are ignored per method."""
    method: Method
    samples_per_level: int = Field(..., ge=2, description="N, samples per level")
    delta_target: float = Field(default=1.0, gt=0)
    delta_epsilon: Optional[float] = Field(default=None, gt=0, description="Defaults to delta_target")
    prior_strength: Optional[float] = Field(default=None, gt=0, description="Symmetric Dirichlet b (bice)")
    bice_update: Literal["predictive", "map"] = "predictive"
    sigma_weights: Optional[Literal["standard", "alternative"]] = Field(
        default=None, description="Weights used to solve for sigma; default standard (ice), alternative (bice)"
    )
    rho: float = Field(default=0.1, gt=0, lt=1, description="CE quantile level")
    t_max: int = Field(default=50, ge=1)
    fresh_final_batch: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def fill_defaults(self) -> "EstimatorConfig":
        if self.delta_epsilon is None:
            self.delta_epsilon = self.delta_target
        if self.method == "bice" and self.prior_strength is None:
            raise ValueError("bice needs prior_strength (symmetric Dirichlet b)")
        return self


class EstimatorReport(BaseModel):
    # +inf marks a level without failures; keep it as the JSON constant Infinity
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: Method
    p_hat: float = Field(..., ge=0)
    samples_per_level: int
    levels: int = 0
    sigma_sequence: List[float] = Field(default_factory=list)
    gamma_sequence: List[float] = Field(default_factory=list)
    delta_sequence: List[float] = Field(default_factory=list, description="Stopping-rule c.o.v. per sampling round")
    ess_sequence: List[float] = Field(default_factory=list, description="ESS of the fitting weights per level")
    lsf_calls: int = 0
    final_params: Optional[IndependentCategorical] = None
    converged: bool = True
    cov_estimate: Optional[float] = None
    abort_reason: str = ""
    prior_strength: Optional[float] = None
    seed: int = 0

    @field_validator("delta_sequence", "sigma_sequence", "gamma_sequence", mode="before")
    @classmethod
    def as_floats(cls, v):
        return [float(x) for x in v]

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "N": self.samples_per_level,
            "b": "" if self.prior_strength is None else repr(float(self.prior_strength)),
            "p_hat": repr(float(self.p_hat)),
            "levels": self.levels,
            "lsf_calls": self.lsf_calls,
            "converged": str(self.converged).lower(),
            "seed": self.seed,
        }


class ReplicationSummary(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: Method
    samples_per_level: int
    prior_strength: Optional[float] = None
    delta_target: float
    repetitions: int = Field(..., ge=2)
    true_pf: float
    mean_estimate: float
    relative_bias: float
    sample_cov: float
    mean_cost: float
    fail_count: int
    mcs_cov_same_cost: float
    mean_final_params: Optional[List[List[float]]] = None

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "N": self.samples_per_level,
            "b": "" if self.prior_strength is None else repr(float(self.prior_strength)),
            "delta": repr(float(self.delta_target)),
            "R": self.repetitions,
            "true_pf": repr(float(self.true_pf)),
            "mean_estimate": repr(float(self.mean_estimate)),
            "rel_bias": repr(float(self.relative_bias)),
            "sample_cov": repr(float(self.sample_cov)),
            "mean_cost": repr(float(self.mean_cost)),
            "mcs_cov_same_cost": repr(float(self.mcs_cov_same_cost)),
            "fail_count": self.fail_count,
        }


class ProblemBlock(BaseModel):
    kind: Literal["linear", "maxflow", "grid"]
    file: Optional[str] = None
    coefficients: Optional[List[float]] = None
    threshold: Optional[float] = None
    load_loss_threshold: float = Field(default=0.30, ge=0, le=1)

    @model_validator(mode="after")
    def check_source(self) -> "ProblemBlock":
        if self.file is None and not (self.kind == "linear" and self.coefficients is not None):
            raise ValueError(f"{self.kind} problem needs a file (inline spec only for linear)")
        if self.kind == "linear" and self.file is None and self.threshold is None:
            raise ValueError("inline linear problem needs a threshold")
        return self


class InputModelBlock(BaseModel):
    """Either a model file, or i.i.d. states with one PMF, or explicit per-dimension lists."""
    file: Optional[str] = None
    dimensions: Optional[int] = Field(default=None, ge=1)
    states: Optional[List[float]] = None
    probabilities: Optional[List[float]] = None
    labels: Optional[List[List[float]]] = None
    probability_table: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def check_source(self) -> "InputModelBlock":
        iid = self.states is not None and self.probabilities is not None
        explicit = self.labels is not None and self.probability_table is not None
        if not (self.file or iid or explicit):
            raise ValueError("input_model needs file, states+probabilities, or labels+probability_table")
        return self


class ReplicationBlock(BaseModel):
    repetitions: int = Field(default=200, ge=2)
    base_seed: int = 0
    true_pf: Union[float, Literal["oracle", "mcs"], None] = None
    truth_file: Optional[str] = None
    mcs_samples: int = Field(default=2_000_000, ge=1)
    sample_sizes: Optional[List[int]] = None
    prior_strengths: Optional[List[float]] = None


class OutputBlock(BaseModel):
    directory: Optional[str] = None
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    problem: ProblemBlock
    input_model: InputModelBlock
    importance_model: Optional[InputModelBlock] = Field(default=None, description="Fixed proposal for method 'is'")
    estimator: EstimatorConfig
    replication: Optional[ReplicationBlock] = None
    output: OutputBlock = Field(default_factory=OutputBlock)
