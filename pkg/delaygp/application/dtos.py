import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..domain.models.enums import DeletionKind, ExperimentKind

Interval = Tuple[float, float]

AGGREGATE_TOLERANCE = 1e-12


# Configuration DTOs
class PlantSection(BaseModel):
    """Plant taken from the plant library."""

    name: str = Field(default="second-order-sine", description="Library plant name")
    order: int = Field(default=2, ge=1, description="Order m")
    domain_box: List[Interval] = Field(
        default=[(-1.5, 1.5), (-1.5, 1.5)], description="State box X"
    )

    class Config:
        extra = "forbid"


class ReferenceSection(BaseModel):
    """Sinusoidal reference q_{d,1}(t) = A sin(ωt + φ)."""

    kind: Literal["sinusoid"] = "sinusoid"
    amplitude: float = Field(default=1.0, description="Amplitude A")
    frequency: float = Field(default=1.0, gt=0, description="Angular frequency ω")
    phase: float = Field(default=0.0, description="Phase φ")

    class Config:
        extra = "forbid"


class GainsSection(BaseModel):
    """Feedback gains Λ_i and Lyapunov weight Q (identity when omitted)."""

    lambdas: List[List[List[float]]] = Field(default=[[[-2.0]], [[-2.0]]])
    q_matrix: Optional[List[List[float]]] = None

    class Config:
        extra = "forbid"


class KernelSection(BaseModel):
    """Squared-exponential kernel hyperparameters."""

    signal_std: float = Field(default=1.0, gt=0)
    lengthscale: float = Field(default=0.2, gt=0)

    class Config:
        extra = "forbid"


class BoundSection(BaseModel):
    """Uniform error bound settings."""

    delta: float = Field(default=0.01, gt=0, lt=1, description="Confidence δ")
    tau: float = Field(default=0.1, gt=0, description="Grid factor τ")
    grid_step: Optional[float] = Field(
        default=None, gt=0, description="Grid for η extrema and Lipschitz estimates (τ)"
    )
    safety_factor: float = Field(default=1.1, ge=1)

    class Config:
        extra = "forbid"


class DelaySection(BaseModel):
    """Offline delay sweeps."""

    delta_bars: List[float] = Field(
        default=[2.0, 0.5, 0.1, 0.01, 0.001], min_length=1, description="Constant Δ̄"
    )
    c: float = Field(default=0.002, ge=0, description="Δ̄ = c N₀ in the data-set sweep")
    n0_values: List[int] = Field(
        default_factory=lambda: list(range(10, 201, 10)), min_length=1
    )

    class Config:
        extra = "forbid"

    @field_validator("delta_bars")
    @classmethod
    def validate_delta_bars(cls, value: List[float]) -> List[float]:
        if any(d <= 0 or not math.isfinite(d) for d in value):
            raise ValueError("Delay bounds must be positive and finite")
        return value

    @field_validator("n0_values")
    @classmethod
    def validate_n0_values(cls, value: List[int]) -> List[int]:
        if any(n < 1 for n in value):
            raise ValueError("N₀ values must be positive")
        return value


class OnlineSection(BaseModel):
    """Event-triggered online learning and the offline comparison."""

    delta_bars: List[float] = Field(default=[0.01, 0.1, 0.45], min_length=1)
    capacity: int = Field(default=200, ge=1, description="N̄")
    deletion: DeletionKind = Field(default=DeletionKind.OLDEST_FIRST)
    eta_refresh_every: int = Field(
        default=100, ge=0, description="Added samples between η refreshes, 0 never"
    )
    e_bar: Optional[float] = Field(
        default=None, gt=0, description="Desired bound ē (minimal admissible when omitted)"
    )
    offline_delta_bar: float = Field(default=0.01, gt=0, description="Δ̄ of the offline GP")
    delta_bar_1: float = Field(default=0.01, gt=0, description="Offline Δ̄₁ of the report")
    delta_bar_2: float = Field(default=0.1, gt=0, description="Online Δ̄₂ of the report")
    tradeoff_delta_bars: List[float] = Field(
        default=[0.01, 0.05, 0.1, 0.2, 0.3, 0.45], min_length=1
    )

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def validate_online(self) -> "OnlineSection":
        if self.deletion == DeletionKind.CUSTOM:
            raise ValueError("Custom deletion strategies are only available from code")
        for d in self.delta_bars + self.tradeoff_delta_bars:
            if d <= 0 or not math.isfinite(d):
                raise ValueError("Delay bounds must be positive and finite")
        return self


class ExperimentConfig(BaseModel):
    """Complete experiment configuration, mirrored by the YAML file."""

    kind: ExperimentKind = Field(default=ExperimentKind.DELAY_SWEEP)
    plant: PlantSection = Field(default_factory=PlantSection)
    reference: ReferenceSection = Field(default_factory=ReferenceSection)
    gains: GainsSection = Field(default_factory=GainsSection)
    kernel: KernelSection = Field(default_factory=KernelSection)
    bound: BoundSection = Field(default_factory=BoundSection)
    delay: DelaySection = Field(default_factory=DelaySection)
    online: OnlineSection = Field(default_factory=OnlineSection)
    noise_std: List[float] = Field(default=[0.01], min_length=1, description="σ_o")
    n0: int = Field(default=100, ge=1, description="Initial data-set size N₀")
    initial_layout: Literal["grid", "uniform"] = "grid"
    horizon: float = Field(default=20.0, ge=0, description="Simulation time T")
    dt: float = Field(default=1e-3, gt=0)
    series_step: float = Field(default=1e-2, gt=0, description="Resampling step of series")
    repetitions: int = Field(default=10, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)
    output_dir: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)
    initial_state: Optional[List[float]] = None

    class Config:
        extra = "forbid"

    @field_validator("noise_std")
    @classmethod
    def validate_noise(cls, value: List[float]) -> List[float]:
        if any(s <= 0 for s in value):
            raise ValueError("Noise standard deviations must be positive")
        return value


# Result DTOs
class SeedRecord(BaseModel):
    """Outcome of one Monte-Carlo repetition at one sweep value."""

    series: str = Field(..., description="gp, baseline, online or offline")
    sweep_value: float
    repetition: int = Field(..., ge=0)
    seed: int = Field(..., ge=0)
    max_error: float = Field(..., ge=0)
    bound: Optional[float] = Field(default=None, description="Theoretical bound")
    delta_tilde: Optional[float] = None
    evaluated: int = Field(default=0, ge=0)
    selected: int = Field(default=0, ge=0)
    final_data_size: int = Field(default=0, ge=0)
    diverged: bool = Field(default=False, description="State left the guard box")

    @property
    def within_bound(self) -> Optional[bool]:
        return None if self.bound is None else self.max_error <= self.bound

    @property
    def sort_key(self) -> Tuple[str, float, int]:
        return (self.series, self.sweep_value, self.repetition)


class SummaryRecord(BaseModel):
    """Aggregate over seeds for one (series, sweep value)."""

    series: str
    sweep_value: float
    count: int = Field(..., ge=1)
    mean_max_error: float
    min_max_error: float
    max_max_error: float
    bound: Optional[float] = None
    within_bound_fraction: Optional[float] = None
    delta_tilde: Optional[float] = None
    evaluated: int = 0
    selected: int = 0
    diverged: int = Field(default=0, ge=0, description="Repetitions that diverged")

    @classmethod
    def from_records(cls, records: List[SeedRecord]) -> "SummaryRecord":
        """Aggregate the records of one group."""
        errors = np.array([r.max_error for r in records])
        bounds = [r.bound for r in records if r.bound is not None]
        checks = [r.within_bound for r in records if r.bound is not None]
        return cls(
            series=records[0].series,
            sweep_value=records[0].sweep_value,
            count=len(records),
            mean_max_error=float(np.mean(errors)),
            min_max_error=float(np.min(errors)),
            max_max_error=float(np.max(errors)),
            bound=max(bounds) if bounds else None,
            within_bound_fraction=float(np.mean(checks)) if checks else None,
            delta_tilde=records[0].delta_tilde,
            evaluated=sum(r.evaluated for r in records),
            selected=sum(r.selected for r in records),
            diverged=sum(r.diverged for r in records),
        )

    @property
    def selected_fraction(self) -> Optional[float]:
        return self.selected / self.evaluated if self.evaluated else None


class ResultTable(BaseModel):
    """Per-seed records plus aggregates, sorted by (series, sweep value, seed)."""

    kind: ExperimentKind
    sweep_variable: str
    records: List[SeedRecord]
    summaries: List[SummaryRecord] = []

    @classmethod
    def from_records(
        cls, kind: ExperimentKind, sweep_variable: str, records: List[SeedRecord]
    ) -> "ResultTable":
        """Sort the records and compute the aggregates."""
        ordered = sorted(records, key=lambda r: r.sort_key)
        groups: Dict[Tuple[str, float], List[SeedRecord]] = {}
        for record in ordered:
            groups.setdefault((record.series, record.sweep_value), []).append(record)
        return cls(
            kind=kind,
            sweep_variable=sweep_variable,
            records=ordered,
            summaries=[SummaryRecord.from_records(group) for group in groups.values()],
        )

    @model_validator(mode="after")
    def validate_aggregates(self) -> "ResultTable":
        for summary in self.summaries:
            errors = [
                r.max_error
                for r in self.records
                if (r.series, r.sweep_value) == (summary.series, summary.sweep_value)
            ]
            if len(errors) != summary.count or not math.isclose(
                float(np.mean(errors)),
                summary.mean_max_error,
                rel_tol=AGGREGATE_TOLERANCE,
                abs_tol=AGGREGATE_TOLERANCE,
            ):
                raise ValueError(
                    f"Aggregate of {summary.series} at {summary.sweep_value} does not "
                    "match its per-seed records"
                )
        return self

    def summary(self, series: str) -> List[SummaryRecord]:
        """Get the aggregates of one series in sweep order."""
        return [s for s in self.summaries if s.series == series]

    def seed_rows(self) -> List[dict]:
        return [r.model_dump() for r in self.records]

    def summary_rows(self) -> List[dict]:
        rows = []
        for s in self.summaries:
            row = s.model_dump()
            row["selected_fraction"] = s.selected_fraction
            rows.append(row)
        return rows


class ValidationSummary(BaseModel):
    """Constants reported by validate-config."""

    kind: ExperimentKind
    state_dim: int
    l_f: float
    delta_bar_limit: float = Field(..., description="1/(2 L_f)")
    p_matrix: List[List[float]]
    xi: float
    chi: float
    beta: float
    joint_confidence: float
    checked_delta_bars: List[float] = []
