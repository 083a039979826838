"""Request and response models for the HTTP service.

A design arrives either as explicit probabilities ``pi`` or as a size
variable ``x`` with a sample size ``n``; exactly one form must be set.
Unit ids are optional labels, defaulting to 1-based positions.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class DesignInput(BaseModel):
    pi: list[float] | None = None
    x: list[float] | None = None
    n: int | None = None
    unit_ids: list[str] | None = None

    @model_validator(mode="after")
    def _one_form(self):
        if (self.pi is None) == (self.x is None):
            raise ValueError("provide exactly one of pi and x")
        if self.x is not None and self.n is None:
            raise ValueError("x needs a sample size n")
        size = len(self.pi) if self.pi is not None else len(self.x)
        if self.unit_ids is not None and len(self.unit_ids) != size:
            raise ValueError("unit_ids length does not match the design")
        return self

    def ids(self) -> list[str]:
        size = len(self.pi) if self.pi is not None else len(self.x)
        return self.unit_ids or [str(k + 1) for k in range(size)]


class HealthResponse(BaseModel):
    status: str
    version: str


class DesignSummary(BaseModel):
    size: int
    n: int
    pi_min: float
    pi_max: float
    sum_pi: float


class ProfileResponse(BaseModel):
    size: int
    n: int
    d1: float
    d2: float
    d3: float
    min_scaled_pi: float
    max_scaled_pi: float
    sampling_fraction: float
    max_top_gap: float


class CurveRequest(BaseModel):
    recipe: str
    fraction: float = Field(gt=0.0, lt=1.0)
    grid: list[int]
    seed: int = 0


class CurveResponse(BaseModel):
    rows: list[ProfileResponse]


class SampleRequest(BaseModel):
    design: DesignInput
    seed: int
    stream_id: int = 0
    variant: str = "sequential"


class SampleUnitRow(BaseModel):
    unit_id: str
    pi: float
    pi0: float
    in_sample: int


class SampleResponse(BaseModel):
    n_prime: int
    working_window: int
    units: list[str]
    rows: list[SampleUnitRow]


class JointRequest(BaseModel):
    design: DesignInput
    kind: str = "unconditional"
    n_prime: int | None = None


class JointResponse(BaseModel):
    kind: str
    n_prime: int | None
    unit_ids: list[str]
    values: list[list[float]]


class FirstOrderResponse(BaseModel):
    unit_ids: list[str]
    pi: list[float]


class EnumerateRequest(BaseModel):
    design: DesignInput
    max_units: int | None = None


class EnumeratedSample(BaseModel):
    units: list[str]
    probability: float


class EnumerateReport(BaseModel):
    size: int
    n: int
    sample_count: int
    tv_distance: float
    mass_sequential: float
    mass_draw_by_draw: float
    max_marginal_error_sequential: float
    max_marginal_error_draw_by_draw: float


class EnumerateResponse(BaseModel):
    samples: list[EnumeratedSample]
    report: EnumerateReport


class EstimateRequest(BaseModel):
    pi: list[float]
    pi0: list[float]
    in_sample: list[int]
    y: list[float]
    estimator: str = "cht"
    with_variance: bool = False


class EstimateResponse(BaseModel):
    estimator: str
    total: float
    mean: float
    variance_estimate: float | None
    n_prime: int


class GenerateRequest(BaseModel):
    recipe: str
    size: int
    seed: int
    target_y_mean: float = 20.0
    target_y_sd: float = 3.0
    signal_sd: float = 2.6


class PopulationRow(BaseModel):
    unit_id: str
    x: float
    y1: float
    y2: float
    y3: float
    y4: float


class GenerateResponse(BaseModel):
    size: int
    mu_x: float
    coefficients: dict[str, dict[str, float]]
    rows: list[PopulationRow]


class SimulateRequest(BaseModel):
    grid: list[int]
    replicates: int
    seed: int
    recipe: str
    fraction: float = Field(gt=0.0, lt=1.0)
    population_seed: int = 0
    variant: str = "sequential"
    estimators: list[str] = ["HT", "CHT"]
    variables: list[str] = ["linear", "quadratic", "exponential", "bump"]


class SimulateCell(BaseModel):
    n: int
    population_size: int
    variable: str
    estimator: str
    mean_estimate: float
    true_total: float
    v_mc: float
    rv_mc: float | None


class SimulateResponse(BaseModel):
    cells: list[SimulateCell]


class InclusionRequest(BaseModel):
    design: DesignInput
    replicates: int = 0
    seed: int = 0
    variant: str = "sequential"
    method: str = "auto"


class InclusionRow(BaseModel):
    unit_id: str
    pi: float
    freq: float
    z_score: float
    flagged: bool


class InclusionResponse(BaseModel):
    rows: list[InclusionRow]


class ErrorBody(BaseModel):
    code: str
    detail: str
