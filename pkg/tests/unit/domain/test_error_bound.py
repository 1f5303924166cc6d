"""
Tests unitarios para la cota uniforme del error de predicción.
"""
import math

import numpy as np
import pytest

from delaygp.domain.exceptions import InvalidArgumentException
from delaygp.domain.models.entities import BoundParams, EtaBound, LipschitzConstants
from delaygp.domain.services.error_bound import (
    build_eta_bound,
    build_grid,
    compute_beta,
    compute_gamma,
    estimate_lipschitz_grid,
    estimate_model_lipschitz,
    eta_at,
    eta_extrema,
    eta_vector,
    grid_lipschitz,
    joint_confidence,
)

BOX = [(-1.5, 1.5), (-1.5, 1.5)]


@pytest.mark.unit
class TestBeta:
    """Tests para β_δ."""

    def test_beta_for_numerical_study(self, bound_params):
        """Test β_δ ≈ 21.613 con δ = 0.01, τ = 0.1 y X = [-1.5, 1.5]²."""
        assert compute_beta(bound_params, 2) == pytest.approx(21.613, abs=1e-3)

    def test_beta_grows_when_delta_shrinks(self):
        """Test menor δ produce mayor β."""
        loose = BoundParams(delta=0.1, tau=0.1, domain_box=BOX)
        tight = BoundParams(delta=0.001, tau=0.1, domain_box=BOX)
        assert compute_beta(tight, 2) - compute_beta(loose, 2) == pytest.approx(
            2 * math.log(100)
        )

    def test_beta_nonincreasing_in_tau(self):
        """Test una malla más gruesa τ no aumenta β."""
        fine = BoundParams(delta=0.01, tau=0.05, domain_box=BOX)
        coarse = BoundParams(delta=0.01, tau=0.1, domain_box=BOX)
        assert compute_beta(coarse, 2) <= compute_beta(fine, 2)

    def test_state_dimension_mismatch(self, bound_params):
        """Test dimensión de estado distinta a la caja."""
        with pytest.raises(InvalidArgumentException):
            compute_beta(bound_params, 3)


@pytest.mark.unit
class TestGamma:
    """Tests para γ_δ y la confianza conjunta."""

    def test_gamma_formula(self):
        """Test γ = (√β L_σ + L_f + L_μ) τ."""
        lip = LipschitzConstants(l_f=1.0, l_mu=2.0, l_sigma=0.5)
        assert compute_gamma(16.0, lip, 0.1) == pytest.approx((4 * 0.5 + 1 + 2) * 0.1)

    def test_gamma_zero_without_lipschitz(self):
        """Test γ = 0 cuando todas las constantes son cero."""
        assert compute_gamma(20.0, LipschitzConstants(), 0.1) == 0.0

    def test_joint_confidence(self):
        """Test 2(1 − δ)ⁿ − 1."""
        assert joint_confidence(0.01, 1) == pytest.approx(0.98)
        assert joint_confidence(0.01, 2) == pytest.approx(2 * 0.99**2 - 1)


@pytest.mark.unit
class TestGrid:
    """Tests para la malla de evaluación."""

    def test_grid_size(self):
        """Test malla de 31 × 31 puntos con paso 0.1."""
        grid = build_grid(BOX, 0.1)
        assert grid.shape == (961, 2)
        assert grid.min() == -1.5
        assert grid.max() == 1.5

    def test_grid_too_coarse(self):
        """Test paso mayor que la caja."""
        with pytest.raises(InvalidArgumentException):
            build_grid([(0.0, 0.5)], 1.0)

    def test_nonpositive_step(self):
        """Test paso no positivo."""
        with pytest.raises(InvalidArgumentException):
            build_grid(BOX, 0.0)


@pytest.mark.unit
class TestLipschitz:
    """Tests para las estimaciones de Lipschitz en malla."""

    def test_linear_function(self):
        """Test f(x) = 3 x₁ − 4 x₂ tiene constante 5."""

        def linear(X):
            X = np.asarray(X)
            return (3 * X[..., 0] - 4 * X[..., 1])[..., None]

        assert grid_lipschitz(linear, BOX, 0.25, safety_factor=1.0) == pytest.approx(
            5.0, rel=1e-6
        )

    def test_plant_lipschitz_with_safety_factor(self, plant):
        """Test L_f ≈ 1.1 · 1.00008 para la planta senoidal."""
        lip = estimate_lipschitz_grid(plant.f, BOX, 0.1, 1.1)
        assert lip.l_f == pytest.approx(1.1001, abs=1e-3)
        assert lip.l_mu == 0.0

    def test_model_lipschitz_per_dimension(self, grid_model):
        """Test una entrada por dimensión de salida con L_f copiado."""
        # Act
        per_dim = estimate_model_lipschitz(grid_model, BOX, 0.25, 1.1, l_f=1.2)

        # Assert
        assert len(per_dim) == 1
        assert per_dim[0].l_f == 1.2
        assert per_dim[0].l_mu > 0
        assert per_dim[0].l_sigma > 0

    def test_model_dispatch(self, grid_model):
        """Test estimate_lipschitz_grid acepta un modelo GP."""
        lip = estimate_lipschitz_grid(grid_model, BOX, 0.25)
        assert lip.l_f == 0.0
        assert lip.l_mu > 0


@pytest.mark.unit
class TestEtaBound:
    """Tests para η_δ y sus extremos."""

    def test_eta_vector(self, grid_model):
        """Test η_{δ,i}(x) = √β σ_i(x) + γ_i."""
        # Arrange
        eb = EtaBound(beta=4.0, gamma_per_dim=[0.3], eta_sup=10.0, eta_inf=0.0)
        x = np.array([0.1, -0.2])
        _, std = grid_model.posterior(x)

        # Act & Assert
        np.testing.assert_allclose(eta_vector(grid_model, x, eb), 2.0 * std + 0.3)
        assert eta_at(grid_model, x, eb) == pytest.approx(float(2.0 * std[0] + 0.3))

    def test_extrema_order(self, grid_model):
        """Test η̲ ≤ η̄ y η̲ es el piso de ruido."""
        # Act
        eta_sup, eta_inf = eta_extrema(grid_model, 16.0, [0.0], BOX, 0.1)

        # Assert
        assert eta_inf == pytest.approx(4.0 * 0.01)
        assert eta_sup > eta_inf

    def test_eta_does_not_increase_after_add(self, grid_model):
        """Test con β y γ fijos, añadir una muestra no aumenta ‖η(x)‖."""
        # Arrange
        eb = EtaBound(beta=21.6, gamma_per_dim=[0.05], eta_sup=10.0, eta_inf=0.0)
        rng = np.random.default_rng(2)
        queries = rng.uniform(-1.5, 1.5, size=(100, 2))
        before = [eta_at(grid_model, x, eb) for x in queries]

        # Act
        updated = grid_model.add_sample(np.array([0.35, -0.6]), np.array([0.2]))
        after = [eta_at(updated, x, eb) for x in queries]

        # Assert
        assert all(a <= b + 1e-12 for a, b in zip(after, before))

    def test_build_eta_bound_shared_gamma(self, grid_model, bound_params):
        """Test γ compartido con una sola constante de Lipschitz."""
        # Act
        eb = build_eta_bound(grid_model, bound_params, [LipschitzConstants(l_f=1.0)])

        # Assert
        assert eb.gamma_per_dim == [pytest.approx(0.1)]
        assert eb.beta == pytest.approx(compute_beta(bound_params, 2))
        assert eb.eta_inf <= eb.eta_sup

    def test_build_eta_bound_wrong_count(self, grid_model, bound_params):
        """Test número de constantes incompatible."""
        with pytest.raises(InvalidArgumentException):
            build_eta_bound(grid_model, bound_params, [LipschitzConstants()] * 3)
