"""
Entry point of the duality-lab command-line tool.

The group parses the flags shared by every subcommand and stores them in a
RunContext on the click context object.
"""

import logging
from typing import Optional

import click

from app.cli.commands import COMMANDS
from app.cli.context import RunContext
from app.core.config import settings
from app.core.logging import configure_logging

logger = logging.getLogger(__name__)


@click.group(help=settings.DESCRIPTION, context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(settings.VERSION, prog_name="duality-lab")
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Experiment document (JSON); the built-in demo is used when omitted",
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None, help="Override the check tolerance")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the Monte Carlo seed")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Logging level (defaults to LOG_LEVEL)",
)
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[str],
    out_dir: Optional[str],
    tol: Optional[float],
    seed: Optional[int],
    threads: Optional[int],
    log_level: Optional[str],
):
    """Exact and Monte Carlo checks of shock duality in the open ASEP."""
    configure_logging(log_level)
    if threads is not None:
        settings.THREADS = threads
    ctx.obj = RunContext(
        config_path=config_path,
        out_dir=out_dir,
        tol=tol,
        seed=seed,
        threads=threads or settings.THREADS,
    )
    logger.debug(f"Run {ctx.obj.run_id} started with config {config_path or 'demo'}")


for command in COMMANDS:
    cli.add_command(command)
