"""
Tests unitarios para la planta, la ley de control y las constantes de cota.
"""
import math
from unittest.mock import patch

import numpy as np
import pytest

from delaygp.domain.exceptions import (
    InvalidArgumentException,
    NoSolutionException,
    PreconditionViolationException,
)
from delaygp.domain.models.entities import EtaBound, LipschitzConstants
from delaygp.domain.services.plant_control import (
    bound_constants,
    box_sup_norm,
    build_companion,
    closed_loop_derivative,
    control_input,
    error_derivative,
    is_hurwitz,
    lyapunov_constants,
    lyapunov_residual,
    make_plant,
    reference_from_callable,
    second_order_sine,
    sinusoid_reference,
    solve_lyapunov,
    tracking_bound_offline,
)

BOX = [(-1.5, 1.5), (-1.5, 1.5)]
P_EXPECTED = np.array([[1.25, 0.25], [0.25, 0.375]])


@pytest.mark.unit
class TestPlantLibrary:
    """Tests para la biblioteca de plantas."""

    def test_second_order_sine_values(self):
        """Test f(0, 0) = 0.25 y vectorización."""
        assert second_order_sine(np.array([0.0, 0.0]))[0] == pytest.approx(0.25)
        values = second_order_sine(np.zeros((3, 4, 2)))
        assert values.shape == (3, 4, 1)

    def test_unknown_plant(self):
        """Test nombre de planta desconocido."""
        with pytest.raises(InvalidArgumentException):
            make_plant("pendulum", 2, BOX)

    def test_linear_zero(self):
        """Test f ≡ 0."""
        plant = make_plant("linear-zero", 1, [(-1.0, 1.0)])
        np.testing.assert_array_equal(plant.f(np.array([0.5])), [0.0])


@pytest.mark.unit
class TestReference:
    """Tests para las referencias."""

    def test_sinusoid_blocks(self, reference):
        """Test x_d(t) = [sin t, cos t] y q̇_{d,2} = −sin t."""
        t = 0.7
        np.testing.assert_allclose(reference.state(t), [math.sin(t), math.cos(t)])
        np.testing.assert_allclose(reference.feedforward(t), [-math.sin(t)], atol=1e-15)

    def test_sinusoid_bounds(self, reference):
        """Test cotas sup ‖x_d‖ = sup ‖q̇_{d,m}‖ = F_d = 1."""
        assert reference.sup_state == pytest.approx(1.0)
        assert reference.sup_feedforward == pytest.approx(1.0)
        assert reference.f_d == pytest.approx(1.0)

    def test_broken_chain_rejected(self):
        """Test bloques que no son derivadas sucesivas."""
        with pytest.raises(InvalidArgumentException):
            reference_from_callable(
                lambda t: np.array([math.sin(t), math.sin(t), math.sin(t)]),
                order=2,
                dim=1,
                horizon=5.0,
            )

    def test_callable_reference_bounds(self):
        """Test cotas muestreadas de una referencia arbitraria."""
        # Arrange
        def trajectory(t):
            return np.array([2 * math.sin(t), 2 * math.cos(t), -2 * math.sin(t)])

        # Act
        ref = reference_from_callable(trajectory, order=2, dim=1, horizon=10.0)

        # Assert
        assert ref.sup_state == pytest.approx(2.0, rel=1e-3)
        assert ref.f_d == pytest.approx(2.0, rel=1e-3)


@pytest.mark.unit
class TestLyapunov:
    """Tests para la matriz compañera y la ecuación de Lyapunov."""

    def test_companion_matrices(self, gains):
        """Test A = [[0, 1], [−2, −2]] y B = [0, 1]ᵀ."""
        a_matrix, b_matrix = build_companion(gains, 2, 1)
        np.testing.assert_array_equal(a_matrix, [[0.0, 1.0], [-2.0, -2.0]])
        np.testing.assert_array_equal(b_matrix, [[0.0], [1.0]])
        assert is_hurwitz(a_matrix)

    def test_companion_shape_mismatch(self, gains):
        """Test ganancias incompatibles con (m, n)."""
        with pytest.raises(InvalidArgumentException):
            build_companion(gains, 3, 1)

    def test_solution_for_numerical_study(self, gains):
        """Test P = [[1.25, 0.25], [0.25, 0.375]]."""
        # Arrange
        a_matrix, _ = build_companion(gains, 2, 1)

        # Act
        p_matrix = solve_lyapunov(a_matrix, np.eye(2))

        # Assert
        np.testing.assert_allclose(p_matrix, P_EXPECTED, atol=1e-10)
        assert lyapunov_residual(a_matrix, p_matrix, np.eye(2)) <= 1e-10

    def test_random_hurwitz_residuals(self):
        """Test residuo ‖AᵀP + PA + Q‖_F ≤ 1e-10 en sistemas Hurwitz aleatorios."""
        rng = np.random.default_rng(11)
        for _ in range(100):
            # Arrange
            size = int(rng.integers(1, 6))
            a_matrix = rng.normal(size=(size, size))
            shift = np.max(np.linalg.eigvals(a_matrix).real) + rng.uniform(0.5, 2.0)
            a_matrix -= shift * np.eye(size)
            root = rng.normal(size=(size, size))
            q_matrix = root @ root.T + np.eye(size)

            # Act
            p_matrix = solve_lyapunov(a_matrix, q_matrix)

            # Assert
            scale = max(1.0, np.linalg.norm(q_matrix))
            assert lyapunov_residual(a_matrix, p_matrix, q_matrix) <= 1e-10 * scale
            assert np.min(np.linalg.eigvalsh(p_matrix)) > 0

    def test_non_hurwitz_has_no_solution(self):
        """Test A no Hurwitz lanza NoSolutionException con los autovalores."""
        # Arrange
        a_matrix = np.array([[0.0, 1.0], [1.0, -1.0]])

        # Act
        with pytest.raises(NoSolutionException) as exc_info:
            solve_lyapunov(a_matrix, np.eye(2))

        # Assert
        assert len(exc_info.value.eigenvalues) == 2

    def test_inaccurate_solution_rejected(self, gains):
        """Test un P con residuo grande no llega a ξ y χ."""
        # Arrange
        a_matrix, _ = build_companion(gains, 2, 1)
        wrong = P_EXPECTED + 0.1 * np.eye(2)

        # Act
        with patch(
            "delaygp.domain.services.plant_control.solve_continuous_lyapunov",
            return_value=wrong,
        ):
            with pytest.raises(NoSolutionException) as exc_info:
                solve_lyapunov(a_matrix, np.eye(2))

        # Assert
        assert "residual" in str(exc_info.value)

    def test_lyapunov_constants(self):
        """Test ξ = 2‖P‖‖Q⁻¹‖ y χ = √κ(P)."""
        # Act
        xi, chi = lyapunov_constants(P_EXPECTED, np.eye(2))

        # Assert
        eigenvalues = np.linalg.eigvalsh(P_EXPECTED)
        assert xi == pytest.approx(2 * eigenvalues[-1])
        assert chi == pytest.approx(math.sqrt(eigenvalues[-1] / eigenvalues[0]))
        assert xi == pytest.approx(2.632782, rel=1e-5)


@pytest.mark.unit
class TestControlLaw:
    """Tests para la ley de control y la dinámica del error."""

    def test_control_input_at_reference(self, reference, gains):
        """Test u = q̇_{d,m} − f̂ sin error de seguimiento."""
        t = 1.3
        u = control_input(t, reference.state(t), reference, np.array([0.2]), gains)
        np.testing.assert_allclose(u, reference.feedforward(t) - 0.2)

    def test_closed_loop_error_identity(self, plant, reference, gains):
        """Test ė = A e + B (f − f̂) en 1000 puntos aleatorios."""
        # Arrange
        rng = np.random.default_rng(12)
        a_matrix, b_matrix = build_companion(gains, 2, 1)
        for _ in range(1000):
            t = rng.uniform(0, 20)
            x = rng.uniform(-1.5, 1.5, size=2)
            f_hat = rng.normal(size=1)

            # Act
            x_dot = closed_loop_derivative(t, x, reference, f_hat, gains, plant)
            blocks = reference.trajectory(t)
            e_dot = x_dot - blocks[1:]
            expected = error_derivative(x - blocks[:2], plant.f(x), f_hat, a_matrix, b_matrix)

            # Assert
            np.testing.assert_allclose(e_dot, expected, atol=1e-12)


@pytest.mark.unit
class TestBoundConstants:
    """Tests para ξ, χ, F y la cota fuera de línea."""

    def _eta(self):
        return EtaBound(beta=21.6, gamma_per_dim=[0.2], eta_sup=0.5, eta_inf=0.25)

    def test_box_sup_norm(self):
        """Test sup ‖x‖ en X es la esquina más lejana."""
        assert box_sup_norm(BOX) == pytest.approx(1.5 * math.sqrt(2))
        assert box_sup_norm([(-1.0, 3.0)]) == 3.0

    def test_f_formula(self, gains, reference):
        """Test F = (‖A‖ sup‖x‖ + ‖Λ‖ sup‖x_d‖ + sup‖q̇_{d,m}‖ + η̄)/(1 − 2 L_f Δ̄)."""
        # Arrange
        a_matrix, b_matrix = build_companion(gains, 2, 1)
        p_matrix = solve_lyapunov(a_matrix, np.eye(2))

        # Act
        bc = bound_constants(
            a_matrix, b_matrix, p_matrix, np.eye(2), LipschitzConstants(l_f=1.1),
            self._eta(), reference, BOX, 0.1,
        )

        # Assert
        numerator = (
            np.linalg.norm(a_matrix, 2) * 1.5 * math.sqrt(2)
            + math.sqrt(8) * 1.0
            + 1.0
            + 0.5
        )
        assert bc.f_const == pytest.approx(numerator / (1 - 2 * 1.1 * 0.1))
        assert bc.f_d == pytest.approx(1.0)
        assert bc.delta_bar == 0.1

    def test_inadmissible_delay(self, gains, reference):
        """Test Δ̄ ≥ 1/(2 L_f) lanza PreconditionViolationException."""
        a_matrix, b_matrix = build_companion(gains, 2, 1)
        with pytest.raises(PreconditionViolationException):
            bound_constants(
                a_matrix, b_matrix, P_EXPECTED, np.eye(2), LipschitzConstants(l_f=1.1),
                self._eta(), reference, BOX, 0.5,
            )

    def test_offline_bound_is_linear_in_delay(self, sample_bound_constants):
        """Test ē = χ ξ (2 L_f F Δ̄ + η̄)."""
        # Act
        value = tracking_bound_offline(sample_bound_constants)

        # Assert
        assert value == pytest.approx(1.5 * 2.0 * (2 * 1.0 * 3.0 * 0.1 + 0.5))
