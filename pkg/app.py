"""
Command-Line Application
Entry point for runs, sparsity sweeps, elasticity histograms and reports
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
from pydantic import ValidationError
from rich.logging import RichHandler

from config import settings
from run_models import ConfigError, RunConfig, load_config
from utils.console import print_error, print_success

logger = logging.getLogger("prunekit")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=verbose)],
        force=True,
    )


def resolve_config(config_path: Optional[Path], seeds: Sequence[int], out: Optional[Path]) -> RunConfig:
    """Config file (or defaults) with command-line seeds and output directory applied"""
    config = load_config(config_path)
    overrides = {}
    if seeds:
        overrides["run.seeds"] = list(seeds)
    if out is not None:
        overrides["run.output_dir"] = str(out)
    return config.with_overrides(**overrides) if overrides else config


config_option = click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
                             help="Flat 'section.key = value' config file")
seed_option = click.option("--seed", "seeds", type=int, multiple=True, help="Seed (repeatable)")
out_option = click.option("--out", type=click.Path(path_type=Path), default=None, help="Output directory")
jobs_option = click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                           help="Parallel worker processes")


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging")
@click.version_option(settings.VERSION, prog_name=settings.PROJECT_NAME)
def cli(verbose: bool) -> None:
    """Elasticity-based pruning experiments"""
    configure_logging(verbose)


@cli.command()
@config_option
@seed_option
@out_option
@jobs_option
def run(config_path, seeds, out, jobs):
    """Run the configured method end-to-end for every seed"""
    from experiments.runner import run as run_experiment
    from experiments.runner import run_id_for

    config = resolve_config(config_path, seeds, out)
    summary = run_experiment(config, jobs=jobs)
    print_success(f"{summary.method}: accuracy {summary.acc_mean:.2f}%, "
                  f"sparsity {summary.headline_sparsity:.2f}%, HM {summary.hm}")
    click.echo(str(Path(config.run.output_dir) / run_id_for(config)))
    return summary


@cli.command()
@config_option
@seed_option
@out_option
@jobs_option
@click.option("--kappa", "kappas", required=True, help="Comma-separated final sparsities, e.g. 0.5,0.9,0.98")
def sweep(config_path, seeds, out, jobs, kappas):
    """Run the configured method at every sparsity and tabulate the trade-off"""
    from experiments.reporting import report
    from experiments.sweep import parse_kappas
    from experiments.sweep import sweep as run_sweep

    config = resolve_config(config_path, seeds, out)
    table, best, sweep_dir = run_sweep(config, parse_kappas(kappas), jobs=jobs)
    report(sweep_dir)
    click.echo(str(sweep_dir))
    return table


@cli.command()
@config_option
@seed_option
@out_option
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True, help="Model checkpoint (.ckpt)")
@click.option("--bins", type=click.IntRange(min=1), default=50, show_default=True)
def hist(config_path, seeds, out, checkpoint, bins):
    """Elasticity curve, log bins and per-layer survival of a checkpoint"""
    from experiments.reporting import report_hist

    config = resolve_config(config_path, (), None)
    out = out or checkpoint.parent / f"hist_{checkpoint.stem}"
    stats = report_hist(checkpoint, config, out, seed=seeds[0] if seeds else 0, bins=bins)
    click.echo(str(out))
    return stats


@cli.command()
@click.argument("directory", type=click.Path(path_type=Path))
def report(directory):
    """Render a finished run or sweep directory"""
    from experiments.reporting import report as render

    kind = render(directory)
    if kind is None:
        raise ConfigError([f"{directory}: no summary.json or sweep.csv"])
    return kind


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Invoke the CLI and map failures to exit codes.

    Returns:
        0 on success, 1 for configuration and usage errors, 2 for runtime failures
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="prunekit",
                          standalone_mode=False)
    except (ConfigError, ValidationError) as e:
        print_error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"Run failed: {e}")
        return EXIT_RUNTIME
    return result if isinstance(result, int) and not isinstance(result, bool) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
