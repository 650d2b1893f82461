import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from app.core.config import settings

_configured = False


def configure_logging(level: Optional[str] = None, force: bool = False) -> None:
    """Install a RichHandler on the root logger (stderr, so reports stay clean on stdout)"""
    global _configured
    if _configured and not force:
        if level:
            logging.getLogger().setLevel(level.upper())
        return

    handler = RichHandler(
        console=Console(stderr=True),
        show_path=settings.debug,
        rich_tracebacks=True,
        markup=False,
    )
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(name)s: %(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )
    _configured = True
