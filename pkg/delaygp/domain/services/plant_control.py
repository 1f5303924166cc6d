"""Canonical-form plant, reference library, control law and bound constants."""

import logging
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from ..exceptions import (
    InvalidArgumentException,
    NoSolutionException,
    PreconditionViolationException,
)
from ..models.entities import (
    BoundConstants,
    ControllerGains,
    EtaBound,
    LipschitzConstants,
    PlantSpec,
    Reference,
)

logger = logging.getLogger(__name__)

LYAPUNOV_TOLERANCE = 1e-10
# Relative residual above which P is rejected
LYAPUNOV_REJECT_TOLERANCE = 1e-6


# Plant library


def second_order_sine(x: np.ndarray) -> np.ndarray:
    """f(x) = sin(x₁) + 0.5 (1 + exp(x₂/10))⁻¹, vectorised over leading axes."""
    x = np.asarray(x, dtype=float)
    value = np.sin(x[..., 0]) + 0.5 / (1.0 + np.exp(x[..., 1] / 10.0))
    return value[..., None]


def linear_zero(x: np.ndarray) -> np.ndarray:
    """f ≡ 0 for a single-dimension plant."""
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape[:-1] + (1,))


PLANT_LIBRARY: Dict[str, Tuple[Callable[[np.ndarray], np.ndarray], int]] = {
    "second-order-sine": (second_order_sine, 1),
    "linear-zero": (linear_zero, 1),
}


def make_plant(
    name: str, order: int, domain_box: Sequence[Tuple[float, float]]
) -> PlantSpec:
    """Build a plant from the library."""
    if name not in PLANT_LIBRARY:
        raise InvalidArgumentException(
            f"Unknown plant '{name}', available: {sorted(PLANT_LIBRARY)}"
        )
    f, dim = PLANT_LIBRARY[name]
    return PlantSpec(name=name, order=order, dim=dim, f=f, domain_box=list(domain_box))


# Reference library


def sinusoid_reference(
    order: int,
    dim: int = 1,
    amplitude: float = 1.0,
    frequency: float = 1.0,
    phase: float = 0.0,
    horizon: float = 20.0,
) -> Reference:
    """q_{d,i}(t) = A ω^(i−1) sin(ωt + φ + (i−1)π/2) in every dimension."""
    powers = np.array([frequency**i for i in range(order + 1)])
    shifts = np.arange(order + 1) * (math.pi / 2.0)

    def trajectory(t: float) -> np.ndarray:
        blocks = amplitude * powers * np.sin(frequency * t + phase + shifts)
        return np.repeat(blocks, dim)

    def sup_norm(first: int, last: int) -> float:
        # block j oscillates as sin² for even j and cos² for odd j
        squares = powers[first:last] ** 2
        parity = np.arange(first, last) % 2
        peak = max(np.sum(squares[parity == 0]), np.sum(squares[parity == 1]))
        return abs(amplitude) * math.sqrt(dim * peak)

    return Reference(
        order=order,
        dim=dim,
        trajectory=trajectory,
        sup_state=sup_norm(0, order),
        sup_feedforward=sup_norm(order, order + 1),
        f_d=sup_norm(1, order + 1),
        chain_check_horizon=horizon,
    )


def reference_from_callable(
    trajectory: Callable[[float], np.ndarray],
    order: int,
    dim: int,
    horizon: float,
    grid_step: float = 1e-2,
) -> Reference:
    """Reference with sup-norm bounds sampled on a time grid."""
    times = np.arange(0.0, horizon + grid_step, grid_step)
    samples = np.array([np.asarray(trajectory(float(t)), dtype=float) for t in times])
    split = order * dim
    return Reference(
        order=order,
        dim=dim,
        trajectory=trajectory,
        sup_state=float(np.max(np.linalg.norm(samples[:, :split], axis=1))),
        sup_feedforward=float(np.max(np.linalg.norm(samples[:, split:], axis=1))),
        f_d=float(np.max(np.linalg.norm(samples[:, dim:], axis=1))),
        chain_check_horizon=horizon,
    )


# Linear algebra


def build_companion(
    gains: ControllerGains, m: int, n: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Companion matrices A (mn × mn) and B (mn × n) of the error dynamics."""
    if len(gains.lambdas) != m or any(
        np.asarray(gain).shape != (n, n) for gain in gains.lambdas
    ):
        raise InvalidArgumentException(
            f"Gains do not describe m={m} blocks of size {n} × {n}"
        )
    size = m * n
    a_matrix = np.zeros((size, size))
    if m > 1:
        a_matrix[: size - n, n:] = np.eye(size - n)
    a_matrix[size - n :, :] = np.hstack([np.asarray(g, dtype=float) for g in gains.lambdas])
    b_matrix = np.zeros((size, n))
    b_matrix[size - n :, :] = np.eye(n)
    return a_matrix, b_matrix


def is_hurwitz(a_matrix: np.ndarray) -> bool:
    """Check if every eigenvalue has a strictly negative real part."""
    return bool(np.max(np.linalg.eigvals(a_matrix).real) < 0)


def solve_lyapunov(a_matrix: np.ndarray, q_matrix: np.ndarray) -> np.ndarray:
    """Solve AᵀP + PA = −Q for the symmetric positive definite P."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    q_matrix = np.asarray(q_matrix, dtype=float)
    eigenvalues = np.linalg.eigvals(a_matrix)
    if np.max(eigenvalues.real) >= 0:
        raise NoSolutionException(
            f"A is not Hurwitz, eigenvalues: {np.round(eigenvalues, 6).tolist()}",
            eigenvalues=eigenvalues.tolist(),
        )
    p_matrix = solve_continuous_lyapunov(a_matrix.T, -q_matrix)
    p_matrix = 0.5 * (p_matrix + p_matrix.T)

    residual = lyapunov_residual(a_matrix, p_matrix, q_matrix)
    scale = max(1.0, float(np.linalg.norm(q_matrix)))
    if residual > LYAPUNOV_REJECT_TOLERANCE * scale:
        raise NoSolutionException(
            f"Lyapunov residual {residual:.3e} is too large to use P",
            eigenvalues.tolist(),
        )
    if residual > LYAPUNOV_TOLERANCE * scale:
        logger.warning(f"Lyapunov residual {residual:.3e} above tolerance")
    if np.min(np.linalg.eigvalsh(p_matrix)) <= 0:
        raise NoSolutionException(
            "Lyapunov solution is not positive definite", eigenvalues.tolist()
        )
    return p_matrix


def lyapunov_residual(
    a_matrix: np.ndarray, p_matrix: np.ndarray, q_matrix: np.ndarray
) -> float:
    """‖AᵀP + PA + Q‖_F."""
    return float(np.linalg.norm(a_matrix.T @ p_matrix + p_matrix @ a_matrix + q_matrix))


def box_sup_norm(domain_box: Sequence[Tuple[float, float]]) -> float:
    """sup_{x∈X} ‖x‖, attained at the farthest box corner."""
    box = np.asarray(domain_box, dtype=float)
    return float(np.linalg.norm(np.max(np.abs(box), axis=1)))


# Bounds


def lyapunov_constants(p_matrix: np.ndarray, q_matrix: np.ndarray) -> Tuple[float, float]:
    """ξ = 2‖P‖‖Q⁻¹‖ and χ = √(‖P⁻¹‖‖P‖)."""
    p_norm = np.linalg.norm(p_matrix, 2)
    xi = 2.0 * p_norm * np.linalg.norm(np.linalg.inv(q_matrix), 2)
    chi = math.sqrt(np.linalg.norm(np.linalg.inv(p_matrix), 2) * p_norm)
    # κ(P) ≥ 1 up to round-off
    return float(xi), max(1.0, float(chi))


def bound_constants(
    a_matrix: np.ndarray,
    b_matrix: np.ndarray,
    p_matrix: np.ndarray,
    q_matrix: np.ndarray,
    lip: LipschitzConstants,
    eta: EtaBound,
    ref: Reference,
    domain_box: Sequence[Tuple[float, float]],
    delta_bar: float,
) -> BoundConstants:
    """ξ, χ, F and the remaining constants of the tracking bounds."""
    if lip.l_f > 0 and delta_bar >= 1.0 / (2.0 * lip.l_f):
        raise PreconditionViolationException(
            f"Δ̄={delta_bar} violates Δ̄ < 1/(2 L_f) = {1.0 / (2.0 * lip.l_f):.6f}"
        )
    n = b_matrix.shape[1]
    xi, chi = lyapunov_constants(p_matrix, q_matrix)

    a_norm = float(np.linalg.norm(a_matrix, 2))
    lambda_norm = float(np.linalg.norm(a_matrix[-n:, :], 2))
    sup_x = box_sup_norm(domain_box)
    f_const = (
        a_norm * sup_x + lambda_norm * ref.sup_state + ref.sup_feedforward + eta.eta_sup
    ) / (1.0 - 2.0 * lip.l_f * delta_bar)

    return BoundConstants(
        p_matrix=p_matrix.tolist(),
        xi=xi,
        chi=chi,
        f_const=float(f_const),
        f_d=ref.f_d,
        l_f=lip.l_f,
        eta_sup=eta.eta_sup,
        eta_inf=eta.eta_inf,
        delta_bar=delta_bar,
        a_norm=a_norm,
        lambda_norm=lambda_norm,
        sup_state_box=sup_x,
        sup_reference=ref.sup_state,
        sup_feedforward=ref.sup_feedforward,
    )


def tracking_bound_offline(bc: BoundConstants) -> float:
    """ē = χ ξ (2 L_f F Δ̄ + η̄_δ) for a fixed (offline) model."""
    return bc.chi * bc.xi * (2.0 * bc.l_f * bc.f_const * bc.delta_bar + bc.eta_sup)


# Control law


def control_input(
    t: float,
    x: np.ndarray,
    ref: Reference,
    f_hat: np.ndarray,
    gains: ControllerGains,
    lambda_row: Optional[np.ndarray] = None,
) -> np.ndarray:
    """u = q̇_{d,m}(t) − f̂ + Σ Λ_i e_i."""
    blocks = np.asarray(ref.trajectory(t), dtype=float)
    split = ref.order * ref.dim
    error = np.asarray(x, dtype=float) - blocks[:split]
    row = gains.lambda_row if lambda_row is None else lambda_row
    return blocks[split:] - np.asarray(f_hat, dtype=float) + row @ error


def closed_loop_derivative(
    t: float,
    x: np.ndarray,
    ref: Reference,
    f_hat: np.ndarray,
    gains: ControllerGains,
    plant: PlantSpec,
    lambda_row: Optional[np.ndarray] = None,
) -> np.ndarray:
    """ẋ of the canonical plant driven by the control law."""
    n = plant.dim
    u = control_input(t, x, ref, f_hat, gains, lambda_row)
    derivative = np.empty_like(x, dtype=float)
    derivative[:-n] = x[n:]
    derivative[-n:] = np.asarray(plant.f(x), dtype=float) + u
    return derivative


def error_derivative(
    e: np.ndarray,
    f_x: np.ndarray,
    f_hat: np.ndarray,
    a_matrix: np.ndarray,
    b_matrix: np.ndarray,
) -> np.ndarray:
    """ė = A e + B (f(x) − f̂)."""
    return a_matrix @ e + b_matrix @ (np.asarray(f_x) - np.asarray(f_hat))
