# Repositories package
from .csv_result_repository import CsvResultRepository
from .in_memory_result_repository import InMemoryResultRepository

__all__ = ["CsvResultRepository", "InMemoryResultRepository"]
