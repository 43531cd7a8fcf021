from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Annotated, Dict, List, Literal, Optional, Union

SCHEMA_VERSION = 1

Coefficient = Union[float, Dict[str, float]]


# Graph document
class VertexEntry(BaseModel):
    id: str
    mu: float


class EdgeEntry(BaseModel):
    a: str
    b: str
    w: float


class DomainEntry(BaseModel):
    vertices: List[str]
    boundary: Optional[List[str]] = None


class GraphDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vertices: List[VertexEntry] = Field(min_length=1)
    edges: List[EdgeEntry] = Field(default_factory=list)
    domain: Optional[DomainEntry] = None


# Problem document
class PowerTermEntry(BaseModel):
    kind: Literal["pow"]
    c: Coefficient
    k: int = Field(ge=0)


class SignedPowerTermEntry(BaseModel):
    kind: Literal["spow"]
    c: Coefficient
    q: float = Field(gt=1.0)


TermEntry = Annotated[Union[PowerTermEntry, SignedPowerTermEntry], Field(discriminator="kind")]


class ArEntry(BaseModel):
    beta: float = Field(gt=1.0)
    r0: float = Field(gt=0.0)


class NonlinearityEntry(BaseModel):
    terms: List[TermEntry] = Field(default_factory=list)
    ar: Optional[ArEntry] = None


class OrderEntry(BaseModel):
    m: int = Field(ge=1)
    p: float = Field(gt=1.0)


class ProblemDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    alpha: Coefficient = 0.0
    lam: float = Field(default=1.0, alias="lambda", gt=0.0)
    f: NonlinearityEntry = Field(default_factory=NonlinearityEntry)
    order: Optional[OrderEntry] = None

    @model_validator(mode="after")
    def check_ar_exponent(self) -> "ProblemDocument":
        # beta must exceed the homogeneity of the principal part
        floor = self.order.p if self.order is not None else 2.0
        if self.f.ar is not None and not self.f.ar.beta > floor:
            raise ValueError(f"AR exponent beta = {self.f.ar.beta:g} must exceed {floor:g}")
        return self


# Reports
class _Report(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, serialization_alias="schema")


class InfoReport(_Report):
    vertices: int
    edges: int
    domain_size: int
    boundary_size: int
    interior_size: int
    volume: float
    mu0: float
    connected: bool
    explicit_boundary: bool


class EigenReport(_Report):
    lambda1: float
    residual: float
    eigenfunction: Dict[str, float]


class LambdaMpReport(_Report):
    m: int
    p: float
    value: float
    certificate: Dict[str, float]
    converged: bool
    heuristic: bool


class SolutionEntry(BaseModel):
    values: Dict[str, float]
    energy: float
    classical_residual_max: float
    alpha_norm_sq: float
    in_ball: Optional[bool] = None
    sign_profile: Literal["positive", "nonnegative", "signed", "trivial"]
    trivial: bool


class SolverTrace(BaseModel):
    restarts: int
    converged_restarts: int
    newton_iterations: int
    deflations: int
    mode: str


class SolveReportModel(_Report):
    solutions: List[SolutionEntry]
    lambda_used: float
    lambda_star: Optional[float] = None
    lambda_star_infinite: bool = False
    rho: Optional[float] = None
    hypotheses: Dict[str, Union[bool, float, str, None]]
    solver_trace: SolverTrace
    seed: int
    positive: Optional[bool] = None


class CheckEntry(BaseModel):
    passed: Optional[bool]
    witness: Optional[Dict[str, Union[str, float]]] = None
    note: str = ""


class HypothesisReport(_Report):
    regime: str
    lambda1: float
    mu0: float
    volume: float
    alpha_l1: float
    kappa: Optional[float] = None
    f_at_zero_nonzero: bool
    ar_two_sided: Optional[CheckEntry] = None
    ar_one_sided: Optional[CheckEntry] = None
    ar_leading_term: Optional[bool] = None
    f1l: CheckEntry
    corollary_measure: CheckEntry
    lambda_star: Optional[float] = None
    lambda_star_infinite: bool = False
    lambda_star_sup_ratio: Optional[float] = None
    lambda_admissible: Optional[bool] = None
    explicit_boundary: bool
