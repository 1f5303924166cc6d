from abc import ABC, abstractmethod
from typing import Any, List, Mapping, Sequence, Type, TypeVar

from pydantic import BaseModel

ReportT = TypeVar("ReportT", bound=BaseModel)


class ResultRepository(ABC):
    """Experiment result repository interface."""

    @abstractmethod
    def save_table(self, name: str, rows: Sequence[Mapping[str, Any]]) -> str:
        """Save a table of records and get its location."""
        pass

    @abstractmethod
    def save_series(self, name: str, columns: Mapping[str, Sequence[float]]) -> str:
        """Save equally long named columns (e.g. a time series)."""
        pass

    @abstractmethod
    def save_report(self, name: str, report: BaseModel) -> str:
        """Save a structured report."""
        pass

    @abstractmethod
    def load_report(self, name: str, report_type: Type[ReportT]) -> ReportT:
        """Load a report saved with save_report."""
        pass

    @abstractmethod
    def list_outputs(self) -> List[str]:
        """Get the names of everything saved so far."""
        pass
