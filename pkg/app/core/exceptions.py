import json
import logging
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


class EigSimError(Exception):
    """Base class for every simulator error"""

    exit_code = EXIT_INTERNAL

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context


class RepetitionError(EigSimError):
    """A node label repeats a process id"""


class DepthError(EigSimError):
    """A node label is deeper than the tree allows"""


class AlreadyAssigned(EigSimError):
    """A resolve-tree node already holds a value"""


class DivergenceError(EigSimError):
    """The resolve fixpoint did not settle"""


class MalformedMessage(EigSimError):
    """A received message cannot be interpreted"""


class UndecidableError(EigSimError):
    """A monitor sequence had to decide without an output of the top-level protocol"""


class NonTermination(EigSimError):
    """Correct processes were still running after the last allowed round"""


class ConfigError(EigSimError):
    exit_code = EXIT_CONFIG


class InfeasiblePattern(ConfigError):
    """A corruption pattern needs more corrupt processes than configured"""


class BudgetExceeded(EigSimError):
    """The exhaustive enumeration would exceed the configured branch cap"""


class PropertyViolation(EigSimError):
    """At least one checked property failed"""

    exit_code = EXIT_VIOLATION


def _emit(payload: Dict[str, Any]) -> None:
    click.echo(json.dumps(payload, sort_keys=True), err=True)


def eigsim_exception_handler(exc: EigSimError) -> int:
    """Handle simulator exceptions"""
    payload: Dict[str, Any] = {
        "error": True,
        "type": type(exc).__name__,
        "message": exc.message,
        "exit_code": exc.exit_code,
    }
    if exc.context:
        payload["context"] = {key: str(value) for key, value in exc.context.items()}
    _emit(payload)
    return exc.exit_code


def validation_exception_handler(exc: ValidationError, source: Optional[str] = None) -> int:
    """Handle validation exceptions"""
    errors = []
    for error in exc.errors():
        field = " -> ".join(str(loc) for loc in error["loc"])
        errors.append({
            "field": field,
            "message": error["msg"],
            "type": error["type"]
        })

    _emit({
        "error": True,
        "message": "Validation error" if source is None else f"Validation error in {source}",
        "exit_code": EXIT_CONFIG,
        "details": errors
    })
    return EXIT_CONFIG


def general_exception_handler(exc: Exception) -> int:
    """Handle general exceptions"""
    logger.error(f"Unhandled exception: {exc}", exc_info=True)

    _emit({
        "error": True,
        "message": "Internal error",
        "exit_code": EXIT_INTERNAL
    })
    return EXIT_INTERNAL
