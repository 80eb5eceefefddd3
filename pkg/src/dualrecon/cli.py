"""Command-line interface.

    recon run <config.yaml> --out DIR [--controls DIR]
    recon preset <name> --out DIR [--seed N] [--noise L] [--m K]
    recon bank <config.yaml> --out DIR
    recon verify <dir>

Exit codes: 0 ok, 1 hard failure, 2 converged with warnings.
The RECON_THREADS environment variable caps BLAS/FFT thread counts.
"""

from __future__ import annotations

import os
import sys


def _apply_thread_env() -> None:
    n = os.environ.get("RECON_THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, n)


_apply_thread_env()

import click  # noqa: E402

from .config import ExperimentConfig  # noqa: E402
from .errors import DualReconError  # noqa: E402
from .experiments import (  # noqa: E402
    STATUS_FAILED,
    bank_controls,
    run_experiment,
    verify_artifacts,
)
from .presets import preset_config, preset_names  # noqa: E402


def _run_and_exit(cfg: ExperimentConfig, out: str, controls: str | None) -> None:
    outcome = run_experiment(cfg, out, controls_dir=controls)
    m = outcome.metrics
    click.echo(
        f"method={m['method']} rel_l2_error={m['rel_l2_error']:.4g} "
        f"budget={m['error_budget']:.4g} status={outcome.status}"
    )
    click.echo(f"artifacts written to {outcome.out_dir}")
    sys.exit(outcome.status)


@click.group()
def main() -> None:
    """Reconstruct PDE initial/final states from sparse sensor data."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="artifact output directory")
@click.option("--controls", default=None, type=click.Path(file_okay=False),
              help="directory of banked controls to reuse")
def run(config_path: str, out: str, controls: str | None) -> None:
    """Run an experiment described by a YAML config file."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
        _run_and_exit(cfg, out, controls)
    except DualReconError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(STATUS_FAILED)


@main.command()
@click.argument("name")
@click.option("--out", default=None, type=click.Path(file_okay=False),
              help="artifact output directory (required except for 'list')")
@click.option("--seed", default=None, type=int, help="noise seed override")
@click.option("--noise", default=None, type=float, help="noise level override")
@click.option("--m", default=None, type=int, help="basis size override")
@click.option("--controls", default=None, type=click.Path(file_okay=False),
              help="directory of banked controls to reuse")
def preset(name: str, out: str, seed: int | None, noise: float | None,
           m: int | None, controls: str | None) -> None:
    """Run a built-in preset (see `recon preset list`)."""
    if name == "list":
        for p in preset_names():
            click.echo(p)
        return
    if out is None:
        raise click.UsageError("--out is required")
    try:
        cfg = preset_config(name, seed=seed, noise=noise, m=m)
        _run_and_exit(cfg, out, controls)
    except DualReconError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(STATUS_FAILED)


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="bank output directory")
def bank(config_path: str, out: str) -> None:
    """Solve and store the controls for a config, for later reuse."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
        bank_controls(cfg, out)
        click.echo(f"controls banked in {out}")
    except DualReconError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(STATUS_FAILED)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
def verify(directory: str) -> None:
    """Re-check invariants on a finished run directory."""
    problems = verify_artifacts(directory)
    if problems:
        for p in problems:
            click.echo(f"FAIL {p}", err=True)
        sys.exit(STATUS_FAILED)
    click.echo("ok")


if __name__ == "__main__":
    main()
