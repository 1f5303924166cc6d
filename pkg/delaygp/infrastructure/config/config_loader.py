import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import ValidationError

from ...application.dtos import ExperimentConfig
from ...domain.exceptions import ConfigurationException
from ...domain.models.enums import ExperimentKind

logger = logging.getLogger(__name__)


def load_config(
    path: Optional[Union[str, Path]] = None,
    kind: Optional[ExperimentKind] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Load and validate an experiment configuration file.

    A missing path yields the default configuration. ``kind`` replaces the
    kind of the file; ``overrides`` (already-parsed command-line flags)
    replace top-level keys and are ignored when None.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        data = _read_yaml(Path(path))

    if kind is not None:
        declared = data.get("kind")
        if declared is not None and declared != kind.value:
            logger.warning(f"Config declares kind '{declared}', running '{kind.value}'")
        data["kind"] = kind.value
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        source = str(path) if path is not None else "<defaults>"
        raise ConfigurationException(f"Invalid configuration {source}: {e}") from e


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigurationException(f"Configuration file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigurationException(f"Malformed YAML in {path}: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationException(f"{path} must contain a mapping at the top level")
    return data
