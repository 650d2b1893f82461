import logging
from pathlib import Path
from typing import Any, Union

import strictyaml

from app.core.exceptions import ConfigError
from app.schemas.config import AdversaryScriptFile, SimConfig

logger = logging.getLogger(__name__)


def _read(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}", path=str(path))
    try:
        return strictyaml.load(path.read_text(encoding="utf-8")).data
    except strictyaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", path=str(path))


def load_config(path: Union[str, Path]) -> SimConfig:
    """Parse a structured-text experiment config; pydantic does the typing"""
    data = _read(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level", path=str(path))
    logger.debug(f"loaded config {path}")
    return SimConfig.model_validate(data)


def load_script(path: Union[str, Path]) -> AdversaryScriptFile:
    data = _read(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level", path=str(path))
    return AdversaryScriptFile.model_validate(data)
