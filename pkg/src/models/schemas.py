import math
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

# ============ COVERING / GRID ============


class CoveringParams(BaseModel):
    """Geometry of the alpha-covering: patch radii, cube constant and truncation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(ge=0.0, lt=1.0)
    n: int = Field(default=1, ge=1, le=3)
    c1: float = Field(default=0.0, ge=0.0)
    a: float = Field(default=0.0, ge=0.0)
    Kmax: int = Field(default=8, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        n = int(data.get("n", 1))
        if not data.get("c1"):
            data["c1"] = math.sqrt(n)
        if not data.get("a"):
            data["a"] = max(2.0 * float(data["c1"]), math.pi * math.sqrt(n) / 2.0) + 0.25
        return data

    @model_validator(mode="after")
    def _check_cube_constant(self) -> "CoveringParams":
        if self.c1 <= 0:
            raise ValueError("c1 must be positive")
        floor = max(2.0 * self.c1, math.pi * math.sqrt(self.n) / 2.0)
        if self.a < floor - 1e-12:
            raise ValueError(f"cube constant a={self.a} below max(2*c1, pi*sqrt(n)/2)={floor}")
        return self

    @property
    def cube_unit(self) -> float:
        """pi/a, the cube side at scale r_k = 1."""
        return math.pi / self.a


class GridParams(BaseModel):
    """Periodic box [-T, T)^n sampled with M points per axis."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=1, ge=1, le=3)
    T: float = Field(default=16 * math.pi, gt=0.0)
    M: int = Field(default=1024, gt=0)
    commensurate_cells: Optional[int] = Field(default=None, gt=0)

    @field_validator("M")
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("points per axis M must be even")
        return value


# ============ SMOOTHNESS / ALMOST DIAGONAL ============


class SmoothnessParams(BaseModel):
    """Parameters (alpha, s, p, q) of the weighted modulation norms."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(ge=0.0, lt=1.0)
    s: float = 0.0
    p: float = Field(default=2.0, ge=1.0)
    q: float = Field(default=2.0, gt=0.0)

    @property
    def p_dual(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1.0)


class AdParams(BaseModel):
    """Decay parameters of the almost-diagonal classes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    J: float
    delta: float = Field(default=1.0, gt=0.0)
    M: float = 0.0
    beta: Optional[float] = None
    s: float = 0.0
    p: float = Field(default=2.0, ge=1.0)
    q: float = Field(default=2.0, gt=0.0)
    n: int = Field(default=1, ge=1, le=3)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def doubling(self) -> float:
        """Doubling exponent; Lebesgue measure (beta = n) when not given."""
        return float(self.n) if self.beta is None else float(self.beta)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def K(self) -> float:
        return max(self.doubling / self.p, (self.doubling - self.n) / self.p)

    @property
    def scalar_threshold(self) -> float:
        return self.n / min(1.0, self.q)


# ============ WEIGHTS / SYMBOLS / CORPUS ============


class WeightSpec(BaseModel):
    """Config-file description of a matrix weight generator."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    generator: Literal["constant", "power", "rotated_power", "scalar", "constant_plus_power"] = (
        "constant"
    )
    matrix: Optional[List[List[float]]] = None
    exponents: Optional[List[float]] = None
    scales: Optional[List[float]] = None
    eps: float = Field(default=0.0, ge=0.0)
    angle: float = 0.0
    base: Literal["abs", "bracket"] = "abs"
    expr: Optional[str] = None
    gamma: float = 0.0


class SymbolSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = "constant"
    value: float = 1.0
    b: float = 0.0
    radius: float = 1.0


class CorpusSpec(BaseModel):
    """
    Test-signal corpus: registry id, size and components. Every other key in the
    section is a numeric registry parameter (sigma, band_high, packets, ...).
    """

    model_config = ConfigDict(frozen=True, extra="allow")

    signal: str = "gaussian"
    count: int = Field(default=1, ge=1)
    components: int = Field(default=1, ge=1, le=3)

    @model_validator(mode="after")
    def _numeric_params(self) -> "CorpusSpec":
        for key, value in (self.model_extra or {}).items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"registry parameter '{key}' must be a number")
        return self

    @property
    def params(self) -> Dict[str, float]:
        return {key: float(value) for key, value in (self.model_extra or {}).items()}


# ============ REPORTS ============


class AdmissibilityReport(BaseModel):
    covers_domain: bool
    n0: int
    size_ratio_bounds: Tuple[float, float]
    eccentricity: float
    neighbor_scale_ratio: float
    samples: int
    first_gap: Optional[float] = None


class EnvelopeFit(BaseModel):
    """Smallest constant C with |values| <= C * envelope on the grid."""

    k: Tuple[int, ...]
    order: float
    constant: float
    capped: bool = False


class WeightClassReport(BaseModel):
    p: float
    estimate: float
    family: str
    divergent: bool
    trend: List[float] = Field(default_factory=list)
    beta: Optional[float] = None
    doubling_constant: Optional[float] = None
    beta_spread: Optional[float] = None


class BandContribution(BaseModel):
    k: Tuple[int, ...]
    value: float


class NormReport(BaseModel):
    value: float
    contributions: List[BandContribution] = Field(default_factory=list)
    norm: str
    window: Optional[str] = None


class ProbeReport(BaseModel):
    """Min/max bracket of a norm-ratio probe over a corpus or random trials."""

    name: str
    ratios: List[float]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def low(self) -> float:
        return min(self.ratios) if self.ratios else 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def high(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


class StrongDoublingReport(BaseModel):
    fitted_constant: float
    pairs: int
    dilation_constant: float


# ============ EXPERIMENT CONFIG / REPORT ============


class ExperimentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    seed: int = Field(default=0, ge=0)


class AlmostDiagSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    J: float = 2.0
    delta: float = 1.0
    M: float = 5.0
    beta: Optional[float] = None
    window_kmax: int = Field(default=2, ge=0)
    window_lmax: int = Field(default=4, ge=0)
    trials: int = Field(default=50, ge=1)


class ExperimentConfig(BaseModel):
    """One experiment: sections mirror the YAML file one level deep."""

    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentSection
    covering: CoveringParams
    grid: GridParams = Field(default_factory=GridParams)
    weight: WeightSpec = Field(default_factory=WeightSpec)
    smoothness: Optional[SmoothnessParams] = None
    almostdiag: AlmostDiagSection = Field(default_factory=AlmostDiagSection)
    symbol: SymbolSpec = Field(default_factory=SymbolSpec)
    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _dimensions_agree(self) -> "ExperimentConfig":
        if self.grid.n != self.covering.n:
            raise ValueError(f"grid.n={self.grid.n} differs from covering.n={self.covering.n}")
        return self

    @property
    def smoothness_params(self) -> SmoothnessParams:
        if self.smoothness is not None:
            return self.smoothness
        return SmoothnessParams(alpha=self.covering.alpha)


class Report(BaseModel):
    experiment: str
    seed: int
    inputs: Dict[str, Any]
    scalars: Dict[str, Any]
    tables: List[str] = Field(default_factory=list)
    passed: bool
    messages: List[str] = Field(default_factory=list)
    runtime_seconds: float = Field(default=0.0, exclude=True)


class Diagnostic(BaseModel):
    """One finding of the pre-run config validation."""

    severity: Literal["error", "info"]
    location: str
    message: str
