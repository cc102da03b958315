from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator

from kmsgraph.models import ReportCommand


class ComponentRead(BaseModel):
    label: str
    vertices: list[str] = Field(min_length=1)
    spectral_radius: float = Field(ge=0.0)
    beta_c: float | None = None


class GraphSummary(BaseModel):
    vertices: list[str]
    edge_count: int = Field(ge=0)
    components: list[ComponentRead]


class VertexTemperatureRead(BaseModel):
    vertex: str
    beta_v: float | None
    has_critical_states: bool


class StateRead(BaseModel):
    beta: float
    supported_at_infinity: bool
    p: dict[str, float]
    delta: dict[str, float]
    approx_fractions: dict[str, str] | None = None


class ExtremalStateRead(BaseModel):
    component: str
    beta: float
    p: dict[str, float]


class CoefficientRead(BaseModel):
    component: str
    value: float
    approx_fraction: str | None = None
    in_combinatorial_support: bool
    max_count: int = Field(ge=0)


class DecompositionRead(BaseModel):
    vertex: str
    beta_v: float
    pole_order: int = Field(ge=1)
    critical_components: list[str]
    max_counts: dict[str, int]
    coefficients: list[CoefficientRead]
    combinatorial_support: list[str]
    numeric_support: list[str]
    phi: StateRead


class TruncationRead(BaseModel):
    w: str
    v: str
    beta: float
    n_terms: int
    truncated: float
    tail_bound: float | None
    exact: float
    bracketed: bool


class FactorizationRead(BaseModel):
    w: str
    v: str
    beta: float
    product_sum: float
    direct: float
    error: float
    ok: bool


class PoleOrderRead(BaseModel):
    vertex: str
    combinatorial: int
    measured: float
    ok: bool


class PathHistogramRead(BaseModel):
    w: str
    v: str
    counts: list[int]
    by_sequence: dict[str, list[int]]
    matches_matrix_powers: bool


class OracleRead(BaseModel):
    truncations: list[TruncationRead]
    factorizations: list[FactorizationRead]
    pole_orders: list[PoleOrderRead]
    histograms: list[PathHistogramRead] = Field(default_factory=list)
    passed: bool


class ToleranceRead(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    critical: float
    support_threshold: float
    eps0: float
    grid_depth: int
    extrapolation_tol: float
    max_residual: float


class DiagnosticsRead(BaseModel):
    tolerances: ToleranceRead
    threads: int = Field(ge=1)
    extrapolation_depth: int | None = None
    extrapolation_residual: float | None = None
    smallest_eps: float | None = None
    delta_at_smallest_eps: float | None = None
    coefficient_sum: float | None = None
    reconstruction_error: float | None = None
    distribution_error: float | None = None
    limit_coefficient_deviation: float | None = None
    kms_residual: float | None = None


class ReportDocument(BaseModel):
    tool: str = "kmsgraph"
    version: str
    command: ReportCommand
    graph: GraphSummary
    minimal_components: list[ComponentRead]
    temperatures: list[VertexTemperatureRead]
    extremal_states: list[ExtremalStateRead] = Field(default_factory=list)
    type_i_vertices: list[str] | None = None
    state: StateRead | None = None
    decomposition: DecompositionRead | None = None
    oracle: OracleRead | None = None
    diagnostics: DiagnosticsRead

    @field_validator("version")
    @classmethod
    def validate_version(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("version cannot be empty")
        return value
