from app.cli.commands import eigsim

__all__ = ["eigsim"]
