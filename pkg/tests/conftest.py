"""
Configuración global de pytest y fixtures compartidas.
"""
import numpy as np
import pytest

from delaygp.application.dtos import (
    DelaySection,
    ExperimentConfig,
    OnlineSection,
)
from delaygp.application.use_cases.experiments import ExperimentUseCases
from delaygp.application.use_cases.scenario import build_scenario, eta_bound_for
from delaygp.domain.models.entities import (
    BoundConstants,
    BoundParams,
    ControllerGains,
    KernelParams,
    LoopConfig,
)
from delaygp.domain.services.gp_regression import GpModel
from delaygp.domain.services.plant_control import make_plant, sinusoid_reference
from delaygp.infrastructure.repositories import InMemoryResultRepository

# Sistema por defecto: x ∈ [-1.5, 1.5]², Λ₁ = Λ₂ = -2, Q = I
DOMAIN_BOX = [(-1.5, 1.5), (-1.5, 1.5)]
NOISE_STD = 0.01


@pytest.fixture
def plant():
    """Planta de segundo orden f(x) = sin(x₁) + 0.5 (1 + exp(x₂/10))⁻¹."""
    return make_plant("second-order-sine", 2, DOMAIN_BOX)


@pytest.fixture
def reference():
    """Referencia x_d(t) = [sin t, cos t]."""
    return sinusoid_reference(order=2)


@pytest.fixture
def gains():
    """Ganancias Λ₁ = Λ₂ = -2 con Q = I₂."""
    return ControllerGains(lambdas=[[[-2.0]], [[-2.0]]], q_matrix=np.eye(2).tolist())


@pytest.fixture
def kernel():
    """Hiperparámetros σ_f = 1, l = 0.2."""
    return KernelParams(signal_std=1.0, lengthscale=0.2)


@pytest.fixture
def bound_params():
    """Parámetros de la cota uniforme con δ = 0.01 y τ = 0.1."""
    return BoundParams(delta=0.01, tau=0.1, domain_box=DOMAIN_BOX)


@pytest.fixture
def grid_model(plant, kernel):
    """GP entrenado con una malla 10 × 10 de mediciones ruidosas."""
    rng = np.random.default_rng(0)
    axis = np.linspace(-1.5, 1.5, 10)
    inputs = np.array([[a, b] for a in axis for b in axis])
    targets = plant.f(inputs) + rng.normal(0.0, NOISE_STD, size=(100, 1))
    return GpModel.fit(inputs, targets, kernel, [NOISE_STD], DOMAIN_BOX)


@pytest.fixture
def loop_config(plant, reference, gains):
    """Configuración del lazo cerrado con horizonte corto."""
    return LoopConfig(
        plant=plant,
        reference=reference,
        gains=gains,
        noise_std=[NOISE_STD],
        horizon=1.0,
        dt=1e-2,
    )


@pytest.fixture
def sample_bound_constants():
    """Constantes de cota redondas para verificar fórmulas a mano."""
    return BoundConstants(
        p_matrix=[[1.25, 0.25], [0.25, 0.375]],
        xi=2.0,
        chi=1.5,
        f_const=3.0,
        f_d=1.0,
        l_f=1.0,
        eta_sup=0.5,
        eta_inf=0.1,
        delta_bar=0.1,
    )


@pytest.fixture
def tiny_config():
    """Configuración de experimento pequeña para pruebas rápidas."""
    return ExperimentConfig(
        horizon=0.5,
        dt=1e-2,
        series_step=0.1,
        repetitions=2,
        n0=16,
        seed=7,
        delay=DelaySection(delta_bars=[0.1, 0.01], n0_values=[9, 16]),
        online=OnlineSection(
            delta_bars=[0.01, 0.1],
            capacity=20,
            tradeoff_delta_bars=[0.01, 0.1],
        ),
    )


@pytest.fixture
def scenario():
    """Escenario completo con los valores por defecto."""
    return build_scenario(ExperimentConfig())


@pytest.fixture
def eta_bound(scenario, grid_model):
    """Cota η del modelo de malla."""
    return eta_bound_for(scenario, grid_model)


@pytest.fixture
def result_repository():
    """Repositorio de resultados en memoria."""
    return InMemoryResultRepository()


@pytest.fixture
def experiment_use_cases(result_repository):
    """Use cases de experimentos con repositorio en memoria."""
    return ExperimentUseCases(result_repository)
