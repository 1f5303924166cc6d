from typing import Any, Dict, List, Mapping, Sequence, Type

import numpy as np
from pydantic import BaseModel

from ...domain.exceptions import ConfigurationException
from ...domain.repositories import ResultRepository
from ...domain.repositories.result_repository import ReportT


class InMemoryResultRepository(ResultRepository):
    """Result repository for tests and dry runs."""

    def __init__(self):
        self.tables: Dict[str, List[Dict[str, Any]]] = {}
        self.series: Dict[str, Dict[str, np.ndarray]] = {}
        self.reports: Dict[str, str] = {}
        self._written: List[str] = []

    def save_table(self, name: str, rows: Sequence[Mapping[str, Any]]) -> str:
        self.tables[name] = [dict(row) for row in rows]
        return self._record(name)

    def save_series(self, name: str, columns: Mapping[str, Sequence[float]]) -> str:
        self.series[name] = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
        return self._record(name)

    def save_report(self, name: str, report: BaseModel) -> str:
        # kept as JSON, like the file repository
        self.reports[name] = report.model_dump_json()
        return self._record(name)

    def load_report(self, name: str, report_type: Type[ReportT]) -> ReportT:
        if name not in self.reports:
            raise ConfigurationException(f"Report {name} does not exist")
        return report_type.model_validate_json(self.reports[name])

    def list_outputs(self) -> List[str]:
        return list(self._written)

    def _record(self, name: str) -> str:
        self._written.append(name)
        return f"memory://{name}"
