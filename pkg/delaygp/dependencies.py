"""Dependency wiring for the command line."""

from typing import Optional

from .application.dtos import ExperimentConfig
from .application.use_cases.experiments import ExperimentUseCases
from .domain.repositories import ResultRepository
from .infrastructure.config.settings import Settings, get_settings
from .infrastructure.repositories import CsvResultRepository


def get_output_dir(config: ExperimentConfig, settings: Settings) -> str:
    """Output directory of the config, falling back to the environment."""
    return config.output_dir or settings.output_dir


def get_result_repository(
    config: ExperimentConfig, settings: Optional[Settings] = None
) -> ResultRepository:
    """Get result repository."""
    settings = settings or get_settings()
    return CsvResultRepository(get_output_dir(config, settings))


def get_experiment_use_cases(
    config: ExperimentConfig,
    settings: Optional[Settings] = None,
    result_repository: Optional[ResultRepository] = None,
) -> ExperimentUseCases:
    """Get experiment use cases with dependency injection."""
    settings = settings or get_settings()
    repository = result_repository or get_result_repository(config, settings)
    return ExperimentUseCases(
        repository, default_seed=settings.seed, default_workers=settings.workers
    )
