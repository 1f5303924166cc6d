"""Builds the closed-loop scenario of an experiment configuration."""

import logging
import math
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel

from ...domain.exceptions import InvalidArgumentException
from ...domain.models.entities import (
    BoundConstants,
    BoundParams,
    ControllerGains,
    EtaBound,
    KernelParams,
    LipschitzConstants,
    LoopConfig,
    PlantSpec,
    Reference,
)
from ...domain.services.error_bound import (
    build_eta_bound,
    compute_beta,
    estimate_lipschitz_grid,
    estimate_model_lipschitz,
)
from ...domain.services.gp_regression import GpModel
from ...domain.services.plant_control import (
    bound_constants,
    build_companion,
    make_plant,
    sinusoid_reference,
    solve_lyapunov,
)
from ..dtos import ExperimentConfig

logger = logging.getLogger(__name__)


class Scenario(BaseModel):
    """Plant, reference, gains and the model-independent bound ingredients."""

    plant: PlantSpec
    reference: Reference
    gains: ControllerGains
    kernel: KernelParams
    bound_params: BoundParams
    noise_std: List[float]
    a_matrix: np.ndarray
    b_matrix: np.ndarray
    p_matrix: np.ndarray
    l_f: float
    beta: float
    grid_step: float
    safety_factor: float

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @property
    def delta_bar_limit(self) -> float:
        """1/(2 L_f), the supremum of admissible delay bounds."""
        return math.inf if self.l_f == 0 else 1.0 / (2.0 * self.l_f)

    def is_admissible(self, delta_bar: float) -> bool:
        return delta_bar < self.delta_bar_limit


def build_scenario(config: ExperimentConfig) -> Scenario:
    """Validate every piece of the configuration that does not need data."""
    plant = make_plant(config.plant.name, config.plant.order, config.plant.domain_box)
    section = config.reference
    reference = sinusoid_reference(
        order=plant.order,
        dim=plant.dim,
        amplitude=section.amplitude,
        frequency=section.frequency,
        phase=section.phase,
        horizon=max(config.horizon, 1.0),
    )
    q_matrix = config.gains.q_matrix or np.eye(plant.state_dim).tolist()
    gains = ControllerGains(lambdas=config.gains.lambdas, q_matrix=q_matrix)
    a_matrix, b_matrix = build_companion(gains, plant.order, plant.dim)
    p_matrix = solve_lyapunov(a_matrix, gains.q_array)

    grid_step = config.bound.grid_step or config.bound.tau
    safety = config.bound.safety_factor
    l_f = estimate_lipschitz_grid(plant.f, plant.domain_box, grid_step, safety).l_f
    bound_params = BoundParams(
        delta=config.bound.delta, tau=config.bound.tau, domain_box=plant.domain_box
    )
    noise_std = _per_dimension(config.noise_std, plant.dim)
    scenario = Scenario(
        plant=plant,
        reference=reference,
        gains=gains,
        kernel=KernelParams(
            signal_std=config.kernel.signal_std, lengthscale=config.kernel.lengthscale
        ),
        bound_params=bound_params,
        noise_std=noise_std,
        a_matrix=a_matrix,
        b_matrix=b_matrix,
        p_matrix=p_matrix,
        l_f=l_f,
        beta=compute_beta(bound_params, plant.state_dim),
        grid_step=grid_step,
        safety_factor=safety,
    )
    logger.debug(
        f"Scenario {plant.name}: L_f={l_f:.6f}, Δ̄ limit={scenario.delta_bar_limit:.6f}"
    )
    return scenario


def _per_dimension(noise_std: List[float], dim: int) -> List[float]:
    if len(noise_std) == 1:
        return noise_std * dim
    if len(noise_std) != dim:
        raise InvalidArgumentException(
            f"noise_std has {len(noise_std)} entries, the plant has {dim} outputs"
        )
    return list(noise_std)


def derive_seed(master_seed: int, repetition: int) -> int:
    """Independent stream seed for one Monte-Carlo repetition."""
    sequence = np.random.SeedSequence([master_seed, repetition])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def initial_inputs(
    domain_box: np.ndarray, n0: int, rng: np.random.Generator, layout: str = "grid"
) -> np.ndarray:
    """Largest even grid with at most n0 points, topped up with uniform points."""
    box = np.asarray(domain_box, dtype=float)
    dim = box.shape[0]
    if layout == "uniform":
        return rng.uniform(box[:, 0], box[:, 1], size=(n0, dim))
    per_axis = int(math.floor(n0 ** (1.0 / dim) + 1e-9))
    if per_axis < 2:
        return rng.uniform(box[:, 0], box[:, 1], size=(n0, dim))
    axes = [np.linspace(low, high, per_axis) for low, high in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([axis.ravel() for axis in mesh])
    remainder = n0 - grid.shape[0]
    if remainder:
        grid = np.vstack([grid, rng.uniform(box[:, 0], box[:, 1], size=(remainder, dim))])
    return grid


def initial_model(
    scenario: Scenario, n0: int, rng: np.random.Generator, layout: str = "grid"
) -> GpModel:
    """GP trained on n0 noisy measurements of the true plant."""
    inputs = initial_inputs(scenario.plant.box, n0, rng, layout)
    noise = np.asarray(scenario.noise_std)
    targets = scenario.plant.f(inputs) + rng.normal(0.0, noise, size=(n0, noise.shape[0]))
    return GpModel.fit(
        inputs, targets, scenario.kernel, scenario.noise_std, scenario.plant.domain_box
    )


def eta_bound_for(scenario: Scenario, model: GpModel) -> EtaBound:
    """η bound of a model with per-dimension Lipschitz estimates of its posterior."""
    per_dim = estimate_model_lipschitz(
        model,
        scenario.plant.domain_box,
        scenario.grid_step,
        scenario.safety_factor,
        l_f=scenario.l_f,
    )
    return build_eta_bound(model, scenario.bound_params, per_dim, scenario.grid_step)


def constants_for(
    scenario: Scenario, eta: EtaBound, delta_bar: float
) -> BoundConstants:
    """Bound constants at one delay bound; raises when Δ̄ is inadmissible."""
    return bound_constants(
        scenario.a_matrix,
        scenario.b_matrix,
        scenario.p_matrix,
        scenario.gains.q_array,
        LipschitzConstants(l_f=scenario.l_f),
        eta,
        scenario.reference,
        scenario.plant.domain_box,
        delta_bar,
    )


def loop_config(scenario: Scenario, config: ExperimentConfig) -> LoopConfig:
    return LoopConfig(
        plant=scenario.plant,
        reference=scenario.reference,
        gains=scenario.gains,
        noise_std=scenario.noise_std,
        horizon=config.horizon,
        dt=config.dt,
        initial_state=config.initial_state,
    )


def resample(times: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Values of a trace on a regular time grid."""
    return np.interp(grid, times, values)


def series_grid(horizon: float, step: float) -> np.ndarray:
    count = int(math.floor(horizon / step + 1e-9)) + 1
    return np.linspace(0.0, (count - 1) * step, count)


def hold(history: List[Tuple[float, int]], grid: np.ndarray) -> np.ndarray:
    """Piecewise-constant (time, value) history sampled on a time grid."""
    if not history:
        return np.zeros_like(grid)
    times, values = (np.asarray(column, dtype=float) for column in zip(*history))
    index = np.searchsorted(times, grid, side="right") - 1
    return values[np.clip(index, 0, None)]
