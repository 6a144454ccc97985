"""
Pydantic models for type safety and validation.

This module defines the parameter blocks, reports and run configuration
shared by the numerical modules and the command-line layer.
"""

import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.fields import Confinement, DensityField, RadialGrid
from src.logger import normalize_level


class GasState(BaseModel):
    """A free-gas state (μ, T, B); range checks are done by the operations."""

    mu: float = Field(..., description="Chemical potential")
    T: float = Field(..., description="Temperature")
    B: float = Field(0.0, description="Magnetic field strength")


class BoundsReport(BaseModel):
    """Two-sided estimate lower <= value <= upper together with its building blocks."""

    lower: float
    value: float
    upper: float
    terms: Dict[str, float] = Field(default_factory=dict, description="Named terms of the estimate")
    contained: bool


class BoundsCalibration(BaseModel):
    """Empirical sandwich constants with a safety factor applied."""

    pressure_lower: float
    pressure_upper: float
    density_lower: float
    density_upper: float
    samples: int


class PhysicalParams(BaseModel):
    """
    Physical input (Z, B, T, μ) with nuclear charge fractions and positions.

    Range checks live in the operations (scale_params, external_potential)
    so they can raise DomainError.
    """

    model_config = ConfigDict(frozen=True)

    Z: float = Field(..., description="Overall nuclear charge scale")
    B: float = Field(0.0, description="Magnetic field strength")
    T: float = Field(..., description="Temperature")
    mu: float = Field(0.0, description="Electrochemical potential")
    charges: List[float] = Field(default_factory=lambda: [1.0], description="Charge fractions z_k")
    positions: Optional[List[Tuple[float, float, float]]] = Field(
        None, description="Nuclear positions before length scaling"
    )
    confinement: Confinement = Field(default_factory=Confinement)

    @property
    def beta(self) -> float:
        """β = B / Z^{4/3}."""
        return self.B / (float(np.cbrt(self.Z)) * self.Z)

    @property
    def length_scale(self) -> float:
        """ℓ = Z^{-1/3} (1 + β)^{-2/5}."""
        q = (1.0 + self.beta) ** 0.2
        return 1.0 / (float(np.cbrt(self.Z)) * q * q)


class ScaledParams(BaseModel):
    """All scaled quantities derived from PhysicalParams."""

    beta: float
    ell: float = Field(..., description="Length scale Z^{-1/3}(1+β)^{-2/5}")
    mu_tilde: float
    T_tilde: float
    B_tilde: float = Field(..., description="β (1+β)^{-2/5}")
    h: float = Field(..., description="Semiclassical parameter Z^{-1/3}(1+β)^{1/5}")
    b: float = Field(..., description="Field parameter Z^{1/3} β (1+β)^{-3/5}")


class FieldRegime(str, Enum):
    """Which free gas a scaled problem uses."""

    FINITE = "finite"
    LOWEST_LANDAU = "lowest_landau"


class ScaledProblem(BaseModel):
    """
    The scaled MTF problem on a radial grid.

    beta = inf selects the lowest-Landau-level functional explicitly.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu_tilde: float = Field(..., description="Scaled chemical potential")
    T_tilde: float = Field(..., description="Scaled temperature")
    beta: float = Field(0.0, description="B / Z^{4/3}, inf allowed")
    z: float = Field(1.0, description="Charge fraction of the nucleus at the origin")
    confinement: Confinement = Field(default_factory=Confinement)
    grid: RadialGrid

    @field_validator("T_tilde")
    @classmethod
    def validate_temperature(cls, v: float) -> float:
        if not (v > 0.0 and math.isfinite(v)):
            raise ValueError(f"Scaled temperature must be positive and finite, got {v}")
        return v

    @field_validator("beta")
    @classmethod
    def validate_beta(cls, v: float) -> float:
        if not v >= 0.0:
            raise ValueError(f"beta must be nonnegative (inf allowed), got {v}")
        return v

    @field_validator("z")
    @classmethod
    def validate_charge(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"Charge fraction z must lie in [0, 1], got {v}")
        return v

    @field_validator("mu_tilde")
    @classmethod
    def validate_mu(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Scaled chemical potential must be finite")
        return v

    @property
    def regime(self) -> FieldRegime:
        return FieldRegime.LOWEST_LANDAU if math.isinf(self.beta) else FieldRegime.FINITE

    @property
    def B_tilde(self) -> float:
        if self.regime is FieldRegime.LOWEST_LANDAU:
            return math.inf
        return self.beta * (1.0 + self.beta) ** (-0.4)

    @property
    def pressure_weight(self) -> float:
        """(1+β)^{-3/5}; the lowest-Landau gas carries no extra weight."""
        if self.regime is FieldRegime.LOWEST_LANDAU:
            return 1.0
        return (1.0 + self.beta) ** (-0.6)


class SolveReport(BaseModel):
    """Outcome of a self-consistent solve."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    density: DensityField
    pressure: float = Field(..., description="Scaled MTF pressure functional at the final density")
    residual: float = Field(..., description="Final weighted sup-norm residual")
    residual_history: List[float] = Field(default_factory=list)
    iterations: int
    converged: bool
    tolerance: float
    hartree: float = Field(..., description="D(ρ, ρ)")
    particle_number: float = Field(..., description="∫ ρ")
    functional_terms: Dict[str, float] = Field(default_factory=dict)
    anderson_steps: int = Field(0, description="Accepted Anderson-mixed steps")

    @model_validator(mode="after")
    def _check_convergence_flag(self) -> "SolveReport":
        if self.converged and not self.residual <= self.tolerance:
            raise ValueError(
                f"A converged report needs residual <= tolerance ({self.residual} > {self.tolerance})"
            )
        return self


class ExchangeReport(BaseModel):
    """Correction term C_{γ,ρ}, the chemical-potential shift and the γ-window diagnostics."""

    gamma: float
    correction: float = Field(..., description="(3 / 5γ) ∫ ρ^{5/3}")
    mu_shift: float = Field(..., description="3.68 γ")
    lower_ratio: Optional[float] = Field(None, description="(1+β)^{2/5} / γ, small inside the window")
    upper_ratio: Optional[float] = Field(None, description="γ / (Z^{4/3}(1+β)^{2/5}), small inside the window")

    @property
    def in_window(self) -> Optional[bool]:
        if self.lower_ratio is None or self.upper_ratio is None:
            return None
        return self.lower_ratio < 1.0 and self.upper_ratio < 1.0


class ExchangeBound(BaseModel):
    """Scaled upper bound functional at the shifted chemical potential plus the correction."""

    mu_tilde_shifted: float
    functional: float
    correction: float
    upper_bound: float


class MinimizerBounds(BaseModel):
    """Uniform bounds on a minimizer."""

    hartree: float
    pressure: float
    pressure_at_zero: float
    l1_norm: float
    l3_2_norm: float
    l5_3_norm: float
    potential_l6_norm: float
    satisfied: bool


class RescaleReport(BaseModel):
    """Dual-path evaluation of the pressure functional."""

    Z: float
    beta: float
    scaled: float
    unscaled: float
    factor: float = Field(..., description="Z^2 / ℓ")
    discrepancy: float


class ScanRow(BaseModel):
    index: int
    beta: float
    pressure: Optional[float] = None
    limit_pressure: Optional[float] = None
    rel_gap: Optional[float] = None
    converged: bool = False
    error: Optional[str] = None


class ScanTable(BaseModel):
    """Convergence table of a β scan toward one of the limit branches."""

    mode: Literal["beta_to_inf", "beta_to_zero"]
    limit_beta: float
    limit_pressure: Optional[float] = None
    limit_converged: bool = False
    rows: List[ScanRow] = Field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.limit_converged and all(row.converged for row in self.rows)

    @property
    def gaps_decreasing(self) -> Optional[bool]:
        gaps = [row.rel_gap for row in self.rows if row.rel_gap is not None]
        if len(gaps) < 2 or len(gaps) != len(self.rows):
            return None
        return all(later < earlier for earlier, later in zip(gaps, gaps[1:]))


class CheckResult(BaseModel):
    """One entry of the self-test battery."""

    name: str
    module: str
    description: str
    measured: float
    tolerance: float
    passed: bool
    error: Optional[str] = None


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


class ScaledSection(BaseModel):
    mu_tilde: float
    T_tilde: float
    beta: float = 0.0
    z: float = 1.0


class EosSection(BaseModel):
    mu: List[float] = Field(default_factory=list)
    T: List[float] = Field(default_factory=list)
    B: List[float] = Field(default_factory=list)


class GridSection(BaseModel):
    n: int = Field(2000, description="Number of radial nodes")
    r_max: Optional[float] = Field(None, description="Outer radius; chosen from the confinement when absent")
    r_min_ratio: float = Field(1e-6, gt=0, lt=1)
    spacing: Literal["log", "linear"] = "log"

    @field_validator("n")
    @classmethod
    def validate_nodes(cls, v: int) -> int:
        if v < 16:
            raise ValueError(f"grid.n must be at least 16, got {v}")
        return v


class SolverSection(BaseModel):
    damping: float = Field(0.5, gt=0, le=1)
    tol: float = Field(1e-6, gt=0)
    max_iter: int = Field(500, ge=1)
    anderson_depth: int = Field(0, ge=0)


class ScanSection(BaseModel):
    betas: List[float] = Field(default_factory=list)
    mode: Literal["beta_to_inf", "beta_to_zero"] = "beta_to_inf"
    max_workers: int = Field(4, ge=1)

    @model_validator(mode="after")
    def _check_schedule(self) -> "ScanSection":
        betas = self.betas
        if any(not (b >= 0.0 and math.isfinite(b)) for b in betas):
            raise ValueError("scan.betas must be finite and nonnegative")
        pairs = list(zip(betas, betas[1:]))
        if self.mode == "beta_to_inf" and any(later <= earlier for earlier, later in pairs):
            raise ValueError("scan.betas must be strictly increasing for beta_to_inf")
        if self.mode == "beta_to_zero" and any(later >= earlier for earlier, later in pairs):
            raise ValueError("scan.betas must be strictly decreasing for beta_to_zero")
        return self


class SelftestSection(BaseModel):
    tolerance_scale: float = Field(1.0, ge=0)


class OutputSection(BaseModel):
    dir: str = "output"
    emit_unscaled: bool = False


class LoggingSection(BaseModel):
    level: str = "INFO"
    file: Optional[str] = Field(None, description='Log file path, or "auto" for a timestamped file in output.dir')

    @field_validator("level")
    @classmethod
    def validate_level(cls, v: str) -> str:
        return normalize_level(v)


class RunConfig(BaseModel):
    """A validated run configuration."""

    command: Literal["eos-table", "solve", "scan", "selftest"]
    physical: Optional[PhysicalParams] = None
    scaled: Optional[ScaledSection] = None
    confinement: Confinement = Field(default_factory=Confinement)
    eos: EosSection = Field(default_factory=EosSection)
    grid: GridSection = Field(default_factory=GridSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    scan: ScanSection = Field(default_factory=ScanSection)
    selftest: SelftestSection = Field(default_factory=SelftestSection)
    output: OutputSection = Field(default_factory=OutputSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)

    @model_validator(mode="after")
    def _check_parameters(self) -> "RunConfig":
        if self.physical is not None and self.scaled is not None:
            raise ValueError("Give either a 'physical' or a 'scaled' parameter block, not both")
        if self.command in ("solve", "scan") and self.physical is None and self.scaled is None:
            raise ValueError(f"Command '{self.command}' needs a 'physical' or a 'scaled' parameter block")

        if self.physical is not None:
            physical = self.physical
            if not physical.T > 0.0:
                raise ValueError(f"physical.T must be positive, got {physical.T}")
            if not physical.Z > 0.0:
                raise ValueError(f"physical.Z must be positive, got {physical.Z}")
            if any(z > 1.0 for z in physical.charges):
                raise ValueError(f"physical.charges must not exceed 1, got {physical.charges}")
            if any(z <= 0.0 for z in physical.charges):
                raise ValueError(f"physical.charges must be positive, got {physical.charges}")
            if not physical.B >= 0.0:
                raise ValueError(f"physical.B must be nonnegative, got {physical.B}")
        if self.scaled is not None:
            if not self.scaled.T_tilde > 0.0:
                raise ValueError(f"scaled.T_tilde must be positive, got {self.scaled.T_tilde}")
            if self.scaled.z > 1.0 or self.scaled.z < 0.0:
                raise ValueError(f"scaled.z must lie in [0, 1], got {self.scaled.z}")
            if not self.scaled.beta >= 0.0:
                raise ValueError(f"scaled.beta must be nonnegative, got {self.scaled.beta}")
        if self.command == "eos-table" and any(t <= 0.0 for t in self.eos.T):
            raise ValueError(f"eos.T values must be positive, got {self.eos.T}")
        if self.command == "scan" and not self.scan.betas:
            raise ValueError("scan.betas must list at least one beta")
        return self
