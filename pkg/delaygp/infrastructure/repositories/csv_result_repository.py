import logging
from pathlib import Path
from typing import Any, List, Mapping, Sequence, Type, Union

import pandas as pd
from pydantic import BaseModel

from ...domain.exceptions import ConfigurationException
from ...domain.repositories import ResultRepository
from ...domain.repositories.result_repository import ReportT

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class CsvResultRepository(ResultRepository):
    """One CSV file per table or series, one JSON file per report."""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._written: List[str] = []

    def save_table(self, name: str, rows: Sequence[Mapping[str, Any]]) -> str:
        """Write the rows with a header line."""
        return self._write_frame(name, pd.DataFrame(list(rows)))

    def save_series(self, name: str, columns: Mapping[str, Sequence[float]]) -> str:
        """Write the columns side by side."""
        return self._write_frame(name, pd.DataFrame({k: list(v) for k, v in columns.items()}))

    def save_report(self, name: str, report: BaseModel) -> str:
        """Write the report as JSON."""
        path = self.output_dir / f"{name}.json"
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        return self._record(name, path)

    def load_report(self, name: str, report_type: Type[ReportT]) -> ReportT:
        """Parse a report written by save_report."""
        path = self.output_dir / f"{name}.json"
        if not path.exists():
            raise ConfigurationException(f"Report {path} does not exist")
        return report_type.model_validate_json(path.read_text(encoding="utf-8"))

    def list_outputs(self) -> List[str]:
        return list(self._written)

    def _write_frame(self, name: str, frame: pd.DataFrame) -> str:
        path = self.output_dir / f"{name}.csv"
        frame.to_csv(
            path,
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
            encoding="utf-8",
        )
        return self._record(name, path)

    def _record(self, name: str, path: Path) -> str:
        self._written.append(name)
        logger.info(f"Wrote {path}")
        return str(path)
