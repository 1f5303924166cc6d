"""Tests de aceptación de los experimentos de seguimiento con retardo."""
import numpy as np
import pytest

from delaygp.application.dtos import DelaySection, ExperimentConfig, OnlineSection
from delaygp.application.use_cases.experiments import ExperimentUseCases
from delaygp.domain.models.entities import BoundParams, DelayModel, KernelParams
from delaygp.domain.models.enums import DelayKind
from delaygp.domain.services import delayed_loop
from delaygp.domain.services.error_bound import build_grid, compute_beta
from delaygp.domain.services.gp_regression import GpModel, kernel_matrix
from delaygp.infrastructure.repositories import InMemoryResultRepository

DOMAIN_BOX = [(-1.5, 1.5), (-1.5, 1.5)]


def _mean_errors(table, series):
    return {s.sweep_value: s.mean_max_error for s in table.summary(series)}


@pytest.mark.slow
@pytest.mark.integration
class TestOfflineDelaySweep:
    """Tests de aceptación del barrido de retardos sin aprendizaje en línea."""

    def setup_method(self):
        """Setup para cada test."""
        self.use_cases = ExperimentUseCases(InMemoryResultRepository())
        config = ExperimentConfig(
            horizon=20.0,
            dt=1e-2,
            repetitions=10,
            seed=1,
            delay=DelaySection(delta_bars=[2.0, 1.0, 0.5, 0.01, 0.001]),
        )
        self.table = self.use_cases.run_delay_sweep(config)
        self.gp = _mean_errors(self.table, "gp")
        self.baseline = self.table.summary("baseline")[0].mean_max_error

    def test_large_delay_exceeds_baseline(self):
        """Test con Δ̄ = 2 el error supera al controlador sin GP."""
        assert self.gp[2.0] > self.baseline

    def test_small_delays_marginal_effect(self):
        """Test Δ̄ = 1e-2 y Δ̄ = 1e-3 difieren en menos de 10 %."""
        assert self.gp[0.01] == pytest.approx(self.gp[0.001], rel=0.1)

    def test_small_delays_beat_baseline(self):
        """Test la compensación con retardo pequeño mejora al controlador sin GP."""
        assert self.gp[0.001] < self.baseline

    def test_error_grows_with_large_delays(self):
        """Test error no decreciente para Δ̄ ≥ 0.5."""
        assert self.gp[0.5] <= self.gp[1.0] <= self.gp[2.0]

    def test_offline_bound_holds(self):
        """Test cota offline en todos los Δ̄ admisibles."""
        for record in self.table.records:
            if record.bound is not None:
                assert record.max_error <= record.bound


@pytest.mark.slow
@pytest.mark.integration
class TestDatasetSweep:
    """Tests de aceptación del compromiso precisión-retardo."""

    def test_more_data_helps_without_delay(self):
        """Test con c = 0 el error medio en N₀ = 200 es menor que en N₀ = 10."""
        # Arrange
        use_cases = ExperimentUseCases(InMemoryResultRepository())
        config = ExperimentConfig(
            horizon=10.0,
            dt=1e-2,
            repetitions=3,
            seed=2,
            delay=DelaySection(c=0.0, n0_values=[10, 200]),
        )

        # Act
        table = use_cases.run_dataset_sweep(config)

        # Assert
        errors = _mean_errors(table, "gp")
        assert errors[200.0] < errors[10.0]

    def test_tradeoff_has_interior_minimum(self):
        """Test con Δ̄ = 0.002 N₀ el mínimo del error medio está en N₀ ∈ [60, 120]."""
        # Arrange
        use_cases = ExperimentUseCases(InMemoryResultRepository())
        config = ExperimentConfig(
            horizon=20.0,
            dt=1e-2,
            repetitions=10,
            seed=0,
            delay=DelaySection(c=0.002, n0_values=list(range(10, 201, 10))),
        )

        # Act
        table = use_cases.run_dataset_sweep(config)

        # Assert
        errors = _mean_errors(table, "gp")
        best = min(errors, key=errors.get)
        assert 60 <= best <= 120
        assert errors[10.0] > errors[best]
        assert errors[200.0] > errors[best]


@pytest.mark.slow
@pytest.mark.integration
class TestOnlineTrigger:
    """Tests de aceptación del aprendizaje en línea con disparo por eventos."""

    def test_error_and_selection_grow_with_delay(self):
        """Test Δ̄ mayor produce más error y una fracción seleccionada no menor."""
        # Arrange
        use_cases = ExperimentUseCases(InMemoryResultRepository())
        config = ExperimentConfig(
            kind="online-trigger",
            horizon=10.0,
            dt=1e-2,
            repetitions=10,
            seed=3,
            online=OnlineSection(delta_bars=[0.01, 0.1, 0.45]),
        )

        # Act
        table = use_cases.run_online_trigger(config)

        # Assert
        summaries = {s.sweep_value: s for s in table.summary("online")}
        low, mid, high = summaries[0.01], summaries[0.1], summaries[0.45]
        assert low.mean_max_error < mid.mean_max_error < high.mean_max_error
        assert high.evaluated < low.evaluated
        assert high.selected_fraction >= low.selected_fraction

    def test_guarantee_holds_in_most_runs(self):
        """Test sup‖e‖ ≤ ē₂ con Δ̄ = 0.01 en al menos 95 % de 20 ejecuciones."""
        # Arrange
        use_cases = ExperimentUseCases(InMemoryResultRepository())
        config = ExperimentConfig(
            kind="online-trigger",
            horizon=20.0,
            dt=1e-2,
            repetitions=20,
            seed=4,
            online=OnlineSection(delta_bars=[0.01]),
        )

        # Act
        table = use_cases.run_online_trigger(config)

        # Assert
        online = table.summary("online")[0]
        assert online.count == 20
        assert online.within_bound_fraction >= 0.95


@pytest.mark.slow
@pytest.mark.integration
class TestLoopRefinement:
    """Tests de estabilidad numérica del lazo."""

    def test_halving_dt_changes_max_error_below_one_percent(self, loop_config, grid_model):
        """Test reducir dt a la mitad cambia max ‖e‖ en menos de 1 %."""
        # Arrange
        config = loop_config.model_copy(update={"horizon": 5.0})
        fine = config.model_copy(update={"dt": config.dt / 2})
        delay = DelayModel(kind=DelayKind.CONSTANT, coefficient=0.1)

        # Act
        coarse_trace = delayed_loop.run(config, grid_model, delay)
        fine_trace = delayed_loop.run(fine, grid_model, delay)

        # Assert
        assert fine_trace.max_error == pytest.approx(coarse_trace.max_error, rel=0.01)


@pytest.mark.slow
@pytest.mark.integration
class TestGpOracles:
    """Tests estadísticos y de equivalencia del GP."""

    def test_uniform_error_bound_coverage(self):
        """Test |f − μ| ≤ √β σ en la malla en al menos 95 % de 100 ensayos."""
        # Arrange
        kernel = KernelParams(signal_std=1.0, lengthscale=0.2)
        beta = compute_beta(BoundParams(delta=0.05, tau=0.1, domain_box=DOMAIN_BOX), 2)
        axis = np.linspace(-1.5, 1.5, 32)
        grid = np.array([[a, b] for a in axis for b in axis])
        eigenvalues, eigenvectors = np.linalg.eigh(kernel_matrix(grid, grid, kernel))
        root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
        rng = np.random.default_rng(5)
        noise = 0.01

        # Act
        covered = 0
        for _ in range(100):
            f = root @ rng.standard_normal(grid.shape[0])
            train = rng.choice(grid.shape[0], size=100, replace=False)
            targets = f[train] + rng.normal(0.0, noise, size=100)
            model = GpModel.fit(grid[train], targets, kernel, [noise], DOMAIN_BOX)
            mean, std = model.posterior_batch(grid)
            if np.all(np.abs(f - mean[:, 0]) <= np.sqrt(beta) * std[:, 0]):
                covered += 1

        # Assert
        assert covered >= 95

    def test_random_update_sequences_match_batch_fit(self):
        """Test 100 secuencias de hasta 50 altas y bajas frente al ajuste completo."""
        # Arrange
        kernel = KernelParams(signal_std=1.0, lengthscale=0.5)
        rng = np.random.default_rng(6)
        queries = build_grid(DOMAIN_BOX, 0.5)

        for _ in range(100):
            model = GpModel.empty(kernel, [0.1], DOMAIN_BOX)
            for _ in range(rng.integers(1, 51)):
                if model.size > 1 and rng.random() < 0.3:
                    model = model.delete_sample(int(rng.integers(model.size)))
                else:
                    x = rng.uniform(-1.5, 1.5, size=2)
                    model = model.add_sample(x, np.array([np.sin(x[0]) + rng.normal(0, 0.1)]))

            # Act
            batch = GpModel.fit(model.inputs, model.targets, kernel, [0.1], DOMAIN_BOX)
            mean, std = model.posterior_batch(queries)
            batch_mean, batch_std = batch.posterior_batch(queries)

            # Assert
            np.testing.assert_allclose(mean, batch_mean, rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(std, batch_std, rtol=1e-8, atol=1e-10)
