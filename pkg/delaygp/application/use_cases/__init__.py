# Use cases package
from .experiments import ExperimentUseCases

__all__ = ["ExperimentUseCases"]
