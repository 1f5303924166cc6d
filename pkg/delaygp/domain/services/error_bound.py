"""Uniform high-probability prediction error bound of GP regression."""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import InvalidArgumentException
from ..models.entities import BoundParams, EtaBound, LipschitzConstants
from .gp_regression import GpModel

logger = logging.getLogger(__name__)

DEFAULT_SAFETY_FACTOR = 1.1

VectorField = Callable[[np.ndarray], np.ndarray]


def compute_beta(bp: BoundParams, state_dim: int) -> float:
    """β_δ = 2 Σ_j log(√(mn)/(2τ)·(x̄_j − x̲_j) + 1) − 2 log δ."""
    box = bp.box
    if box.shape[0] != state_dim:
        raise InvalidArgumentException(
            f"Domain box has {box.shape[0]} axes, state dimension is {state_dim}"
        )
    widths = box[:, 1] - box[:, 0]
    scale = math.sqrt(state_dim) / (2.0 * bp.tau)
    return float(2.0 * np.sum(np.log(scale * widths + 1.0)) - 2.0 * math.log(bp.delta))


def compute_gamma(beta: float, lip: LipschitzConstants, tau: float) -> float:
    """γ_δ = (√β_δ L_σ + L_f + L_μ) τ."""
    return (math.sqrt(beta) * lip.l_sigma + lip.l_f + lip.l_mu) * tau


def joint_confidence(delta: float, out_dim: int) -> float:
    """Probability 2(1 − δ)ⁿ − 1 with which the tracking bounds hold."""
    return 2.0 * (1.0 - delta) ** out_dim - 1.0


def eta_vector(model: GpModel, x: np.ndarray, eb: EtaBound) -> np.ndarray:
    """Per-dimension bound η_{δ,i}(x) = √β σ_i(x) + γ_i."""
    _, std = model.posterior(x)
    return math.sqrt(eb.beta) * std + eb.gamma


def eta_at(model: GpModel, x: np.ndarray, eb: EtaBound) -> float:
    """‖η_δ(x)‖."""
    return float(np.linalg.norm(eta_vector(model, x, eb)))


def build_grid(domain_box: Sequence[Tuple[float, float]], grid_step: float) -> np.ndarray:
    """Evenly spaced grid over a box with spacing at most grid_step."""
    if grid_step <= 0:
        raise InvalidArgumentException("grid_step must be positive")
    box = np.asarray(domain_box, dtype=float)
    axes = []
    for low, high in box:
        count = int(math.floor((high - low) / grid_step + 1e-9)) + 1
        if count < 2:
            raise InvalidArgumentException(
                f"grid_step={grid_step} leaves a single point on [{low}, {high}]"
            )
        axes.append(np.linspace(low, high, count))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([axis.ravel() for axis in mesh])


def _grid_gradient_norms(
    fn: VectorField, grid: np.ndarray, step: float
) -> np.ndarray:
    """Spectral norm of the central-difference Jacobian at every grid point."""
    base = np.atleast_2d(np.asarray(fn(grid), dtype=float).reshape(grid.shape[0], -1))
    out_dim = base.shape[1]
    jacobian = np.empty((grid.shape[0], out_dim, grid.shape[1]))
    for j in range(grid.shape[1]):
        shift = np.zeros(grid.shape[1])
        shift[j] = step
        ahead = np.asarray(fn(grid + shift), dtype=float).reshape(grid.shape[0], -1)
        behind = np.asarray(fn(grid - shift), dtype=float).reshape(grid.shape[0], -1)
        jacobian[:, :, j] = (ahead - behind) / (2.0 * step)
    return np.linalg.norm(jacobian, ord=2, axis=(1, 2))


def grid_lipschitz(
    fn: VectorField,
    domain_box: Sequence[Tuple[float, float]],
    grid_step: float,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
) -> float:
    """Max finite-difference gradient norm over the grid, times safety_factor."""
    grid = build_grid(domain_box, grid_step)
    step = grid_step * 1e-4
    return float(np.max(_grid_gradient_norms(fn, grid, step))) * safety_factor


def estimate_lipschitz_grid(
    fn: Union[VectorField, GpModel],
    domain_box: Sequence[Tuple[float, float]],
    grid_step: float,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
) -> LipschitzConstants:
    """Lipschitz constants of a vector field (L_f) or of a model (L_μ, L_σ)."""
    if isinstance(fn, GpModel):
        per_dim = estimate_model_lipschitz(fn, domain_box, grid_step, safety_factor)
        return LipschitzConstants(
            l_mu=max(lip.l_mu for lip in per_dim),
            l_sigma=max(lip.l_sigma for lip in per_dim),
        )
    return LipschitzConstants(l_f=grid_lipschitz(fn, domain_box, grid_step, safety_factor))


def estimate_model_lipschitz(
    model: GpModel,
    domain_box: Sequence[Tuple[float, float]],
    grid_step: float,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
    l_f: float = 0.0,
) -> List[LipschitzConstants]:
    """Per-output-dimension L_μ and L_σ of the posterior on the grid."""
    constants = []
    for i in range(model.out_dim):

        def mean_i(X: np.ndarray, i: int = i) -> np.ndarray:
            return model.posterior_batch(X)[0][:, i]

        def std_i(X: np.ndarray, i: int = i) -> np.ndarray:
            return model.posterior_batch(X)[1][:, i]

        constants.append(
            LipschitzConstants(
                l_f=l_f,
                l_mu=grid_lipschitz(mean_i, domain_box, grid_step, safety_factor),
                l_sigma=grid_lipschitz(std_i, domain_box, grid_step, safety_factor),
            )
        )
    return constants


def eta_extrema(
    model: GpModel,
    beta: float,
    gamma_per_dim: Sequence[float],
    domain_box: Sequence[Tuple[float, float]],
    grid_step: float,
) -> Tuple[float, float]:
    """(η̄_δ, η̲_δ): grid max of ‖η_δ(x)‖ and the closed-form noise floor."""
    gamma = np.asarray(gamma_per_dim, dtype=float)
    root_beta = math.sqrt(beta)
    grid = build_grid(domain_box, grid_step)
    _, std = model.posterior_batch(grid)
    eta_sup = float(np.max(np.linalg.norm(root_beta * std + gamma, axis=1)))
    eta_inf = float(np.linalg.norm(root_beta * model.noise_std + gamma))
    return eta_sup, eta_inf


def build_eta_bound(
    model: GpModel,
    bp: BoundParams,
    lipschitz_per_dim: Sequence[LipschitzConstants],
    grid_step: Optional[float] = None,
) -> EtaBound:
    """Compose β_δ, γ_{δ,i} and the η extrema for a model."""
    step = bp.tau if grid_step is None else grid_step
    beta = compute_beta(bp, model.state_dim)
    if len(lipschitz_per_dim) == model.out_dim:
        gammas = [compute_gamma(beta, lip, bp.tau) for lip in lipschitz_per_dim]
    elif len(lipschitz_per_dim) == 1:
        gammas = [compute_gamma(beta, lipschitz_per_dim[0], bp.tau)] * model.out_dim
    else:
        raise InvalidArgumentException(
            f"Expected 1 or {model.out_dim} Lipschitz records, got {len(lipschitz_per_dim)}"
        )
    eta_sup, eta_inf = eta_extrema(model, beta, gammas, bp.domain_box, step)
    logger.debug(f"β={beta:.4f}, γ={gammas}, η̄={eta_sup:.4f}, η̲={eta_inf:.4f}")
    return EtaBound(beta=beta, gamma_per_dim=gammas, eta_sup=eta_sup, eta_inf=eta_inf)
