import logging
from typing import Optional, Sequence

import click
from pydantic import ValidationError

from app.cli import eigsim
from app.core.config import settings
from app.core.exceptions import (
    EXIT_OK,
    EigSimError,
    eigsim_exception_handler,
    general_exception_handler,
    validation_exception_handler,
)
from app.core.logging import configure_logging

logger = logging.getLogger(__name__)


def create_application() -> click.Command:
    """Configure logging and return the command-line application"""
    configure_logging(settings.log_level)
    return eigsim


def run_command(args: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map every outcome to an exit code"""
    app = create_application()
    try:
        result = app.main(args=list(args or []), prog_name="eigsim", standalone_mode=False)
        return result if isinstance(result, int) else EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 1
    except ValidationError as exc:
        return validation_exception_handler(exc, source="config")
    except EigSimError as exc:
        return eigsim_exception_handler(exc)
    except Exception as exc:
        return general_exception_handler(exc)
