import logging
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console
from rich.table import Table

from app.core.config import settings
from app.core.exceptions import EXIT_OK, EXIT_VIOLATION, ConfigError
from app.core.logging import configure_logging
from app.schemas.config import ADVERSARY_NAMES, SimConfig
from app.schemas.reports import PropertyReport
from app.schemas.trace import ExecutionTrace
from app.services.exhaustive_oracle import exhaustive_oracle
from app.services.property_checks import check_properties
from app.services.sync_sim import run_batch
from app.utils.loader import load_config

logger = logging.getLogger(__name__)


def _trace_path(base: str, seed: int, runs: int) -> Path:
    path = Path(base)
    if runs == 1:
        return path
    return path.with_name(f"{path.stem}-{seed}{path.suffix or '.jsonl'}")


def _emit(report: PropertyReport) -> None:
    click.echo(report.model_dump_json())


def _table(reports: List[PropertyReport]) -> None:
    table = Table(title=f"{settings.app_name} v{settings.app_version}")
    table.add_column("seed", justify="right")
    table.add_column("adversary")
    table.add_column("rounds", justify="right")
    table.add_column("f", justify="right")
    table.add_column("max bits", justify="right")
    table.add_column("max |IT|", justify="right")
    table.add_column("|CT|", justify="right")
    table.add_column("failed")
    for report in reports:
        failed = ", ".join(verdict.name for verdict in report.failures()) or "-"
        table.add_row(
            str(report.seed), report.adversary, str(report.rounds), str(report.f_actual),
            str(report.max_bits), str(report.max_it_size), str(report.ct_size), failed,
        )
    Console().print(table)


@click.command(name="eigsim", context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Experiment config file")
@click.option("--seed", type=int, default=None, help="Override the config seed")
@click.option("--runs", type=int, default=None, help="Number of seeds to run, starting at --seed")
@click.option("--emit-trace", "emit_trace", type=click.Path(dir_okay=False), default=None, help="Write trace(s) as JSON lines")
@click.option("--check", is_flag=True, help="Check every property and fail on violations")
@click.option("--exhaustive", is_flag=True, help="Run the n=4, t=1 exhaustive adversary oracle")
@click.option("--adversary", default=None, help=f"Override the adversary ({', '.join(ADVERSARY_NAMES)} or a script path)")
@click.option("--replay", type=click.Path(exists=True, dir_okay=False), default=None, help="Re-check a stored trace")
@click.option("--table", "show_table", is_flag=True, help="Also print a summary table")
@click.option("--workers", type=int, default=None, help="Worker processes for batches and the oracle")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def eigsim(
    ctx: click.Context,
    config_path: Optional[str],
    seed: Optional[int],
    runs: Optional[int],
    emit_trace: Optional[str],
    check: bool,
    exhaustive: bool,
    adversary: Optional[str],
    replay: Optional[str],
    show_table: bool,
    workers: Optional[int],
    verbose: bool,
) -> None:
    """Run, check and replay simulated executions of the early-stopping EIG agreement protocol"""
    configure_logging("DEBUG" if verbose else None, force=verbose)

    if exhaustive:
        report = exhaustive_oracle(workers=workers)
        click.echo(report.model_dump_json())
        ctx.exit(EXIT_OK if report.passed else EXIT_VIOLATION)

    if replay:
        report = check_properties(ExecutionTrace.read(replay))
        _emit(report)
        if show_table:
            _table([report])
        ctx.exit(EXIT_VIOLATION if check and not report.passed else EXIT_OK)

    config_path = config_path or settings.default_config
    if not config_path:
        raise ConfigError("no config given (use --config or EIGSIM_DEFAULT_CONFIG)")
    config = load_config(config_path)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if adversary is not None:
        overrides["adversary"] = adversary
    if overrides:
        config = SimConfig.model_validate({**config.model_dump(), **overrides})
    runs = runs or config.runs

    traces = run_batch(config, runs=runs, workers=workers)
    reports = []
    for trace in traces:
        header = trace.header
        if emit_trace:
            trace.write(_trace_path(emit_trace, header.seed, runs))
        report = check_properties(trace)
        reports.append(report)
        _emit(report)
    if show_table:
        _table(reports)

    failed = [report.seed for report in reports if not report.passed]
    if failed:
        logger.warning(f"property violations for seeds {failed}")
    ctx.exit(EXIT_VIOLATION if check and failed else EXIT_OK)
