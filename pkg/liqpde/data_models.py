# Copyright (c) 2026 liqpde developers
# MIT License

import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from liqpde.exceptions import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENT_NAMES = (
    "solve",
    "simulate",
    "verify-bounds",
    "certificate",
    "asymptotics",
    "compare-strategies",
)


class CoefficientSpec(BaseModel):
    form: Literal["constant", "affine_clipped", "logistic", "tabulated"] = "constant"
    value: float = 0.0
    intercept: float = 0.0
    slope: List[float] = []
    floor: Optional[float] = None
    cap: Optional[float] = None
    width: Optional[float] = None
    low: float = 0.0
    high: float = 1.0
    axis: int = 0
    nodes: List[float] = []
    values: List[float] = []

    @field_validator("width")
    def width_validation(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v < 0:
            raise ValueError(f"Width: '{v}' must be nonnegative")
        return v

    @field_validator("axis")
    def axis_validation(cls, v: int) -> int:
        assert v >= 0, "Axis must be a nonnegative index"
        return v

    @model_validator(mode="after")
    def form_validation(self) -> "CoefficientSpec":
        if self.floor is not None and self.cap is not None and not self.floor < self.cap:
            raise ValueError(f"Floor {self.floor} must be below cap {self.cap}")
        if self.form == "tabulated":
            if len(self.nodes) < 2 or len(self.nodes) != len(self.values):
                raise ValueError("Tabulated coefficient needs at least 2 nodes and one value per node")
            if any(b <= a for a, b in zip(self.nodes, self.nodes[1:])):
                raise ValueError("Tabulated nodes must be strictly increasing")
        return self


class FactorSection(BaseModel):
    dim: int = 1
    noise_dim: int = 1
    drift: List[CoefficientSpec] = [CoefficientSpec()]
    diffusion: List[List[CoefficientSpec]] = [[CoefficientSpec(value=1.0)]]
    drift_bound: Optional[float] = None
    diffusion_bound: Optional[float] = None
    lipschitz: Optional[float] = None
    ellipticity: Optional[float] = None

    @field_validator("dim", "noise_dim")
    def dimension_validation(cls, v: int) -> int:
        assert v >= 1, "Dimensions must be positive"
        return v

    @model_validator(mode="after")
    def shape_validation(self) -> "FactorSection":
        if len(self.drift) != self.dim:
            raise ValueError(f"Drift has {len(self.drift)} components, expected {self.dim}")
        if len(self.diffusion) != self.dim or any(
            len(row) != self.noise_dim for row in self.diffusion
        ):
            raise ValueError(f"Diffusion must be a {self.dim}x{self.noise_dim} matrix")
        return self


class CostSection(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    eta: CoefficientSpec = CoefficientSpec(value=1.0)
    gamma: CoefficientSpec = CoefficientSpec(value=0.0)
    lam: CoefficientSpec = Field(default=CoefficientSpec(value=0.0), alias="lambda")
    theta: float = 0.0
    p: float = 2.0
    kappa0: float = 1.0

    @field_validator("theta")
    def theta_validation(cls, v: float) -> float:
        assert v >= 0, "Dark pool intensity must be nonnegative"
        return v

    @field_validator("kappa0")
    def kappa0_validation(cls, v: float) -> float:
        assert v > 0, "Impact floor kappa0 must be positive"
        return v


class DomainSection(BaseModel):
    lower: List[float] = [-1.0]
    upper: List[float] = [1.0]
    boundary: Literal["neumann"] = "neumann"

    @model_validator(mode="after")
    def box_validation(self) -> "DomainSection":
        if len(self.lower) != len(self.upper):
            raise ValueError("Domain bounds must have the same dimension")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("Domain upper bounds must exceed lower bounds")
        return self


class InitialSection(BaseModel):
    t0: float = 0.0
    y0: List[float] = [0.0]
    x0: float = 1.0


class ProblemSection(BaseModel):
    factor: FactorSection = FactorSection()
    costs: CostSection = CostSection()
    horizon: float = 1.0
    domain: DomainSection = DomainSection()
    initial: InitialSection = InitialSection()
    mesh_density: int = 101
    tolerance: float = 1e-9

    @field_validator("horizon")
    def horizon_validation(cls, v: float) -> float:
        assert v > 0, "Horizon must be positive"
        return v

    @field_validator("mesh_density")
    def mesh_density_validation(cls, v: int) -> int:
        assert v >= 3, "Validation mesh needs at least 3 nodes per axis"
        return v

    @model_validator(mode="after")
    def dimension_validation(self) -> "ProblemSection":
        d = self.factor.dim
        if len(self.domain.lower) != d or len(self.initial.y0) != d:
            raise ValueError(f"Domain and initial state must have dimension {d}")
        return self


class GridSection(BaseModel):
    n_time: int = 1000
    n_space: int = 41
    refinement_ratio: float = 0.5
    n_refine: int = 10
    series_tol: float = 1e-12
    solver_tol: float = 1e-10
    max_sweeps: int = 50
    min_step: float = 1e-12
    box_sensitivity: bool = False

    @field_validator("refinement_ratio")
    def refinement_ratio_validation(cls, v: float) -> float:
        assert 0 < v < 1, "Refinement ratio must lie in (0, 1)"
        return v

    @field_validator("n_space")
    def n_space_validation(cls, v: int) -> int:
        assert v >= 3, "At least 3 space nodes per axis are required"
        return v

    @field_validator("n_time")
    def n_time_validation(cls, v: int) -> int:
        assert v >= 1, "At least one time step is required"
        return v


class SimulationSection(BaseModel):
    n_paths: int = 10_000
    seed: int = 20240101
    n_steps: int = 200
    refinement_ratio: float = 0.5
    n_refine: int = 12
    bound_steps: int = 2000
    bound_paths: int = 100_000
    probes: List[List[float]] = []
    checkpoints: int = 8
    strategies: List[Literal["optimal", "twap", "primary_only"]] = [
        "optimal",
        "twap",
        "primary_only",
    ]
    strict_baselines: List[Literal["twap", "primary_only"]] = []
    dump_paths: int = 0
    workers: int = 1

    @field_validator("n_paths", "bound_paths")
    def paths_validation(cls, v: int) -> int:
        assert v >= 2, "At least two paths are required for a standard error"
        return v

    @field_validator("refinement_ratio")
    def refinement_ratio_validation(cls, v: float) -> float:
        assert 0 < v < 1, "Refinement ratio must lie in (0, 1)"
        return v


class ExperimentSpec(BaseModel):
    name: str
    output: Optional[str] = None

    @field_validator("name")
    def name_validation(cls, v: str) -> str:
        if v not in EXPERIMENT_NAMES:
            raise ValueError(f"Experiment: '{v}' is not one of {', '.join(EXPERIMENT_NAMES)}")
        return v


class ExperimentConfig(BaseModel):
    problem: ProblemSection = ProblemSection()
    grid: GridSection = GridSection()
    simulation: SimulationSection = SimulationSection()
    experiments: List[ExperimentSpec] = []
    out_dir: Optional[str] = None


def _describe(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{where}: {item['msg']}")
    return "; ".join(lines)


def parse_config(raw: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_describe(e)}") from e


def load_config(path: Path) -> ExperimentConfig:
    """
    Read a TOML experiment configuration and validate it.
    """
    try:
        raw = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as e:
        # the decoder message carries "(at line X, column Y)"
        raise ConfigError(f"{path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"{path}: cannot read configuration ({e})") from e
    return parse_config(raw)
