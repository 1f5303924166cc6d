import math
from typing import Any, Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..exceptions import (
    InvalidArgumentException,
    PreconditionViolationException,
)
from .enums import DelayKind, DeletionKind

Interval = Tuple[float, float]


def _check_box(box: List[Interval]) -> List[Interval]:
    if not box:
        raise InvalidArgumentException("Domain box must have at least one axis")
    for j, (low, high) in enumerate(box):
        if not low < high:
            raise InvalidArgumentException(
                f"Domain box axis {j} is empty or degenerate: [{low}, {high}]"
            )
    return box


class KernelParams(BaseModel):
    """Squared-exponential kernel hyperparameters."""

    signal_std: float = Field(default=1.0, gt=0, description="Signal std σ_f")
    lengthscale: float = Field(default=0.2, gt=0, description="Lengthscale l")

    class Config:
        frozen = True


class BoundParams(BaseModel):
    """Inputs of the uniform GP error bound."""

    delta: float = Field(..., gt=0, lt=1, description="Confidence parameter δ")
    tau: float = Field(..., gt=0, description="Grid factor τ")
    domain_box: List[Interval] = Field(..., description="Box [x̲_j, x̄_j] per axis")

    class Config:
        frozen = True

    @field_validator("domain_box")
    @classmethod
    def validate_domain_box(cls, value: List[Interval]) -> List[Interval]:
        return _check_box(value)

    @property
    def box(self) -> np.ndarray:
        return np.asarray(self.domain_box, dtype=float)


class LipschitzConstants(BaseModel):
    """Lipschitz constants of f, the posterior mean and the posterior std."""

    l_f: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    l_mu: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    l_sigma: float = Field(default=0.0, ge=0, allow_inf_nan=False)

    class Config:
        frozen = True


class EtaBound(BaseModel):
    """Scaling and extrema of the uniform prediction error bound η_δ."""

    beta: float = Field(..., gt=0, description="β_δ")
    gamma_per_dim: List[float] = Field(..., min_length=1, description="γ_{δ,i}")
    eta_sup: float = Field(..., ge=0, description="η̄_δ")
    eta_inf: float = Field(..., ge=0, description="η̲_δ")

    class Config:
        frozen = True

    @field_validator("gamma_per_dim")
    @classmethod
    def validate_gamma(cls, value: List[float]) -> List[float]:
        if any(g < 0 or not math.isfinite(g) for g in value):
            raise ValueError("γ values must be finite and nonnegative")
        return value

    @model_validator(mode="after")
    def validate_order(self) -> "EtaBound":
        if self.eta_inf > self.eta_sup:
            raise ValueError(
                f"η̲_δ={self.eta_inf} exceeds η̄_δ={self.eta_sup}"
            )
        return self

    @property
    def gamma(self) -> np.ndarray:
        return np.asarray(self.gamma_per_dim, dtype=float)


class PlantSpec(BaseModel):
    """Controllable-canonical plant q̇_m = f(x) + u."""

    name: str = Field(default="custom", description="Plant identifier")
    order: int = Field(..., ge=1, description="Order m")
    dim: int = Field(..., ge=1, description="Block dimension n")
    f: Callable[[np.ndarray], np.ndarray] = Field(
        ..., description="True nonlinearity, vectorised over leading axes"
    )
    domain_box: List[Interval] = Field(..., description="State box X")

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def validate_dimensions(self) -> "PlantSpec":
        _check_box(self.domain_box)
        if len(self.domain_box) != self.order * self.dim:
            raise InvalidArgumentException(
                f"Domain box has {len(self.domain_box)} axes, "
                f"expected m·n = {self.order * self.dim}"
            )
        value = np.asarray(self.f(self.box.mean(axis=1)), dtype=float)
        if value.shape != (self.dim,):
            raise InvalidArgumentException(
                f"f must map R^{self.state_dim} to R^{self.dim}, got shape {value.shape}"
            )
        return self

    @property
    def state_dim(self) -> int:
        return self.order * self.dim

    @property
    def box(self) -> np.ndarray:
        return np.asarray(self.domain_box, dtype=float)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        """Check if a state lies in X."""
        box = self.box
        return bool(np.all(x >= box[:, 0] - tol) and np.all(x <= box[:, 1] + tol))


class Reference(BaseModel):
    """Reference trajectory [q_{d,1}, …, q_{d,m}, q_{d,m+1}] with declared bounds."""

    order: int = Field(..., ge=1)
    dim: int = Field(..., ge=1)
    trajectory: Callable[[float], np.ndarray] = Field(
        ..., description="t -> stacked blocks of length (m+1)·n"
    )
    sup_state: float = Field(..., ge=0, description="sup_t ‖x_d(t)‖")
    sup_feedforward: float = Field(..., ge=0, description="sup_t ‖q̇_{d,m}(t)‖")
    f_d: float = Field(..., ge=0, description="F_d ≥ sup_t ‖ẋ_d(t)‖")
    chain_check_horizon: float = Field(default=20.0, gt=0)
    chain_check_points: int = Field(default=50, ge=2)
    chain_tolerance: float = Field(default=1e-6, gt=0)

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def validate_chain(self) -> "Reference":
        n, m = self.dim, self.order
        h = 1e-4
        for t in np.linspace(h, self.chain_check_horizon, self.chain_check_points):
            blocks = np.asarray(self.trajectory(float(t)), dtype=float)
            if blocks.shape != ((m + 1) * n,):
                raise InvalidArgumentException(
                    f"Reference must return {(m + 1) * n} values, got {blocks.shape}"
                )
            ahead = np.asarray(self.trajectory(float(t) + h), dtype=float)
            behind = np.asarray(self.trajectory(float(t) - h), dtype=float)
            derivative = (ahead[: m * n] - behind[: m * n]) / (2 * h)
            mismatch = np.max(np.abs(derivative - blocks[n:]))
            scale = max(1.0, float(np.max(np.abs(blocks))))
            if mismatch > self.chain_tolerance * scale:
                raise InvalidArgumentException(
                    f"Reference blocks violate q̇_(d,i) = q_(d,i+1) at t={t:.4f} "
                    f"(mismatch {mismatch:.3e})"
                )
        return self

    def state(self, t: float) -> np.ndarray:
        """Get x_d(t)."""
        return np.asarray(self.trajectory(t), dtype=float)[: self.order * self.dim]

    def feedforward(self, t: float) -> np.ndarray:
        """Get q̇_{d,m}(t) = q_{d,m+1}(t)."""
        return np.asarray(self.trajectory(t), dtype=float)[self.order * self.dim :]


class ControllerGains(BaseModel):
    """Feedback gains Λ_1 … Λ_m and the Lyapunov weight Q."""

    lambdas: List[List[List[float]]] = Field(..., min_length=1)
    q_matrix: List[List[float]] = Field(...)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def validate_gains(self) -> "ControllerGains":
        n = len(self.lambdas[0])
        for i, gain in enumerate(self.lambdas):
            array = np.asarray(gain, dtype=float)
            if array.shape != (n, n):
                raise InvalidArgumentException(
                    f"Λ_{i + 1} has shape {array.shape}, expected ({n}, {n})"
                )
        size = self.order * n
        q = self.q_array
        if q.shape != (size, size):
            raise InvalidArgumentException(
                f"Q has shape {q.shape}, expected ({size}, {size})"
            )
        if not np.allclose(q, q.T, atol=1e-12):
            raise InvalidArgumentException("Q must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) <= 0:
            raise InvalidArgumentException("Q must be positive definite")

        from ..services.plant_control import build_companion, is_hurwitz

        a_matrix, _ = build_companion(self, self.order, n)
        if not is_hurwitz(a_matrix):
            raise InvalidArgumentException(
                "Gains do not induce a Hurwitz companion matrix: "
                f"eigenvalues {np.linalg.eigvals(a_matrix).tolist()}"
            )
        return self

    @property
    def order(self) -> int:
        return len(self.lambdas)

    @property
    def dim(self) -> int:
        return len(self.lambdas[0])

    @property
    def lambda_arrays(self) -> List[np.ndarray]:
        return [np.asarray(gain, dtype=float) for gain in self.lambdas]

    @property
    def lambda_row(self) -> np.ndarray:
        """Get [Λ_1 … Λ_m] as an n × mn block row."""
        return np.hstack(self.lambda_arrays)

    @property
    def q_array(self) -> np.ndarray:
        return np.asarray(self.q_matrix, dtype=float)


class BoundConstants(BaseModel):
    """Constants entering the delay-aware tracking error bounds."""

    p_matrix: List[List[float]]
    xi: float = Field(..., gt=0, description="ξ = 2‖P‖‖Q⁻¹‖")
    chi: float = Field(..., ge=1, description="χ = √(‖P⁻¹‖‖P‖)")
    f_const: float = Field(..., gt=0, description="F")
    f_d: float = Field(..., ge=0, description="F_d")
    l_f: float = Field(..., ge=0, description="L_f")
    eta_sup: float = Field(..., ge=0, description="η̄_δ")
    eta_inf: float = Field(..., ge=0, description="η̲_δ")
    delta_bar: float = Field(..., ge=0, description="Δ̄")
    a_norm: float = Field(default=0.0, ge=0)
    lambda_norm: float = Field(default=0.0, ge=0)
    sup_state_box: float = Field(default=0.0, ge=0)
    sup_reference: float = Field(default=0.0, ge=0)
    sup_feedforward: float = Field(default=0.0, ge=0)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def validate_delay(self) -> "BoundConstants":
        if self.l_f > 0 and self.delta_bar >= 1.0 / (2.0 * self.l_f):
            raise PreconditionViolationException(
                f"Δ̄={self.delta_bar} violates Δ̄ < 1/(2 L_f) = {1.0 / (2.0 * self.l_f)}"
            )
        return self

    @property
    def p_array(self) -> np.ndarray:
        return np.asarray(self.p_matrix, dtype=float)


class DelayModel(BaseModel):
    """Simulated computation time Δ as a function of the data-set size N."""

    kind: DelayKind = Field(default=DelayKind.CONSTANT)
    coefficient: float = Field(..., gt=0, description="Constant Δ̄ or factor c")
    cap: Optional[float] = Field(default=None, gt=0, description="Upper bound Δ̄")
    min_delay: float = Field(default=1e-3, gt=0, description="Floor for N = 0")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def validate_cap(self) -> "DelayModel":
        if self.kind != DelayKind.CONSTANT and self.cap is None:
            raise InvalidArgumentException(
                f"{self.kind.value} delay model needs a cap Δ̄ to stay bounded"
            )
        if self.min_delay > self.delta_bar:
            raise InvalidArgumentException(
                f"min_delay={self.min_delay} exceeds Δ̄={self.delta_bar}"
            )
        return self

    @property
    def delta_bar(self) -> float:
        """Get the bound Δ̄."""
        if self.kind == DelayKind.CONSTANT:
            return self.coefficient if self.cap is None else min(self.coefficient, self.cap)
        return float(self.cap)

    def evaluate(self, data_size: int) -> float:
        """Get Δ for a model holding data_size samples."""
        if self.kind == DelayKind.CONSTANT:
            return self.delta_bar
        power = 1 if self.kind == DelayKind.LINEAR else 2
        raw = self.coefficient * float(data_size) ** power
        return min(max(raw, self.min_delay), self.delta_bar)


class DelaySchedule(BaseModel):
    """Evaluation times t_{k+1} = t_k + Δ(t_k) with t_0 = 0."""

    eval_times: List[float] = Field(default_factory=lambda: [0.0])

    @field_validator("eval_times")
    @classmethod
    def validate_times(cls, value: List[float]) -> List[float]:
        if not value or value[0] != 0.0:
            raise InvalidArgumentException("Schedule must start at t_0 = 0")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise InvalidArgumentException("Schedule times must be increasing")
        return value

    @classmethod
    def from_delay_model(
        cls, delay: DelayModel, horizon: float, data_size: int = 0
    ) -> "DelaySchedule":
        """Build the schedule for a fixed data-set size up to the horizon."""
        times = [0.0]
        while times[-1] <= horizon:
            times.append(times[-1] + delay.evaluate(data_size))
        return cls(eval_times=times)


class ScheduleEvent(BaseModel):
    """One evaluation cycle: started at t_k, committed at t_k + Δ(t_k)."""

    index: int = Field(..., ge=0)
    start_time: float = Field(..., ge=0)
    commit_time: float = Field(..., ge=0)
    data_size: int = Field(..., ge=0)
    state: List[float]
    prediction: List[float]


class TriggerEvent(BaseModel):
    """Outcome of one event-trigger evaluation."""

    time: float = Field(..., ge=0)
    eta_norm: float = Field(..., ge=0)
    upsilon: float
    error_norm: float = Field(..., ge=0)
    triggered: bool
    added: bool = False
    data_size: int = Field(..., ge=0)


class TriggerPolicy(BaseModel):
    """Event-triggered update policy with a desired tracking bound ē."""

    e_bar: float = Field(..., ge=0, description="Desired tracking bound ē")
    bc: BoundConstants
    eta_bound: EtaBound
    deletion: DeletionKind = Field(default=DeletionKind.OLDEST_FIRST)
    capacity: int = Field(default=200, ge=1, description="N̄")
    strategy: Optional[Any] = Field(
        default=None, description="DeletionStrategy used with DeletionKind.CUSTOM"
    )
    eta_refresh: Optional[Any] = Field(
        default=None, description="Callable returning the η bound of a model"
    )
    refresh_every: int = Field(
        default=0, ge=0, description="Added samples between η refreshes, 0 never"
    )

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def validate_admissible(self) -> "TriggerPolicy":
        from ..services.event_trigger import min_error_bound

        minimum = min_error_bound(self.bc)
        if self.e_bar < minimum * (1.0 - 1e-12):
            raise PreconditionViolationException(
                f"ē={self.e_bar} is below the minimal admissible bound {minimum}"
            )
        if self.deletion == DeletionKind.CUSTOM and self.strategy is None:
            raise InvalidArgumentException("Custom deletion needs a strategy object")
        if self.refresh_every and self.eta_refresh is None:
            raise InvalidArgumentException("refresh_every needs an eta_refresh callable")
        return self


class TradeoffInputs(BaseModel):
    """Inputs of the offline-vs-online certificate."""

    delta_bar_1: float = Field(..., ge=0, description="Offline Δ̄₁")
    delta_bar_2: float = Field(..., ge=0, description="Online Δ̄₂")
    eta_sup: float = Field(..., ge=0, description="η̄_δ")
    eta_inf: float = Field(..., ge=0, description="η̲_δ")
    bc: BoundConstants

    class Config:
        frozen = True

    @model_validator(mode="after")
    def validate_order(self) -> "TradeoffInputs":
        if self.delta_bar_1 > self.delta_bar_2:
            raise PreconditionViolationException(
                f"Δ̄₁={self.delta_bar_1} must not exceed Δ̄₂={self.delta_bar_2}"
            )
        if self.bc.l_f > 0 and self.delta_bar_2 >= 1.0 / (2.0 * self.bc.l_f):
            raise PreconditionViolationException(
                f"Δ̄₂={self.delta_bar_2} violates Δ̄₂ < 1/(2 L_f) = "
                f"{1.0 / (2.0 * self.bc.l_f)}"
            )
        return self

    @property
    def delta_tilde(self) -> float:
        return self.delta_bar_2 - self.delta_bar_1

    @property
    def eta_tilde(self) -> float:
        return self.eta_sup - self.eta_inf


class LoopConfig(BaseModel):
    """Closed-loop simulation setup."""

    plant: PlantSpec
    reference: Reference
    gains: ControllerGains
    noise_std: List[float] = Field(..., min_length=1)
    horizon: float = Field(default=20.0, ge=0)
    dt: float = Field(default=1e-3, gt=0)
    initial_state: Optional[List[float]] = None
    guard_factor: float = Field(default=2.0, ge=1)

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def validate_consistency(self) -> "LoopConfig":
        m, n = self.plant.order, self.plant.dim
        if (self.reference.order, self.reference.dim) != (m, n):
            raise InvalidArgumentException("Reference shape does not match the plant")
        if (self.gains.order, self.gains.dim) != (m, n):
            raise InvalidArgumentException("Gain shapes do not match the plant")
        if len(self.noise_std) != n or any(s <= 0 for s in self.noise_std):
            raise InvalidArgumentException(f"noise_std needs {n} positive entries")
        if self.initial_state is not None and len(self.initial_state) != m * n:
            raise InvalidArgumentException(f"initial_state needs {m * n} entries")
        return self

    @property
    def x0(self) -> np.ndarray:
        if self.initial_state is None:
            return self.reference.state(0.0)
        return np.asarray(self.initial_state, dtype=float)

    @property
    def guard_box(self) -> np.ndarray:
        box = self.plant.box
        center = box.mean(axis=1)
        half = (box[:, 1] - box[:, 0]) / 2.0 * self.guard_factor
        return np.column_stack([center - half, center + half])


class SimTrace(BaseModel):
    """Time-indexed record of one closed-loop run."""

    times: np.ndarray
    states: np.ndarray
    references: np.ndarray
    error_norms: np.ndarray
    compensation: np.ndarray
    schedule: List[ScheduleEvent] = []
    trigger_events: List[TriggerEvent] = []
    initial_hypothesis: str = Field(
        default="zero-initial-error", description="Which guarantee hypothesis holds"
    )

    class Config:
        arbitrary_types_allowed = True

    @property
    def max_error(self) -> float:
        return float(np.max(self.error_norms)) if self.error_norms.size else 0.0

    @property
    def evaluated_count(self) -> int:
        return len(self.trigger_events)

    @property
    def selected_count(self) -> int:
        return sum(1 for event in self.trigger_events if event.triggered)

    @property
    def data_size_history(self) -> List[Tuple[float, int]]:
        return [(event.start_time, event.data_size) for event in self.schedule]

    @property
    def final_data_size(self) -> int:
        return self.schedule[-1].data_size if self.schedule else 0

    @property
    def committed_inputs(self) -> List[Tuple[float, List[float]]]:
        """(commit time, state the prediction was computed from) per cycle."""
        return [(event.commit_time, event.state) for event in self.schedule]

    @property
    def eval_times(self) -> List[float]:
        return [event.start_time for event in self.schedule]


class TradeoffReport(BaseModel):
    """Both sides of both inequalities of the offline/online certificate."""

    offline_certified: bool
    e_bar_offline: float = Field(..., description="ē₁")
    e_bar_online: float = Field(..., description="ē₂")
    delta_bar_1: float
    delta_bar_2: float
    delta_tilde: float = Field(..., description="Δ̃ = Δ̄₂ − Δ̄₁")
    eta_tilde: float = Field(..., description="η̃ = η̄ − η̲")
    first_lhs: float
    first_rhs: float
    first_holds: bool
    second_lhs: float
    second_rhs: float
    second_holds: bool
