import asyncio
from datetime import datetime
from pathlib import Path
from typing import List, Optional

import orjson
import typer
from rich.console import Console
from rich.table import Table

from config.experiment import ExperimentTag, load_experiment_config
from config.settings import MAX_WORKERS, OUTPUT_DIR
from core.errors import ConfigError
from services.artifact_store import ArtifactStore, RunManifest
from services.experiment_runner import run_experiment
from services.scheduler import ExperimentQueue
from utils.logger import get_logger

app = typer.Typer(help="Benjamin-Ono soliton verification lab", no_args_is_help=True)
console = Console()
logger = get_logger(__name__)

ConfigOption = typer.Option(None, "--config", help="key=value experiment file")
OutOption = typer.Option(None, "--out", help="Output directory (default: a fresh one under runs/)")
SeedOption = typer.Option(None, "--seed", min=0, help="Seed for random perturbations")
OverrideOption = typer.Option([], "--override", help="key=value, repeatable")


def _default_out(experiment: str) -> Path:
    stamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
    return OUTPUT_DIR / f"{experiment}_{stamp}"


def _summary_table(manifest: RunManifest) -> Table:
    table = Table(title=f"{manifest.experiment}: {manifest.outcome}")
    table.add_column("key", style="cyan")
    table.add_column("value")
    for key, value in sorted(manifest.summary.items()):
        if isinstance(value, float):
            rendered = f"{value:.6g}"
        elif isinstance(value, (dict, list)):
            rendered = orjson.dumps(value).decode()
        else:
            rendered = str(value)
        table.add_row(key, rendered)
    if manifest.error:
        table.add_row("error", f"[red]{manifest.error}[/red]")
    return table


def _launch(
    forced: Optional[ExperimentTag],
    config: Optional[Path],
    out: Optional[Path],
    seed: Optional[int],
    override: List[str],
):
    overrides = list(override)
    if forced is not None:
        overrides.append(f"experiment={forced.value}")
    try:
        cfg = load_experiment_config(config, overrides, seed)
    except ConfigError as e:
        console.print(f"[red]{e}[/red]")
        raise typer.Exit(code=2)

    out_dir = out or _default_out(cfg.experiment.value)
    logger.info(f"Running {cfg.experiment.value} into {out_dir}")
    manifest = run_experiment(cfg, out_dir)
    console.print(_summary_table(manifest))
    console.print(f"outputs: {out_dir}")
    if manifest.outcome != "completed":
        raise typer.Exit(code=1)


@app.command()
def simulate(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    override: List[str] = OverrideOption,
):
    """Run the experiment named in the config (soliton_translate by default)"""
    _launch(None, config, out, seed, override)


@app.command()
def spectrum(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    override: List[str] = OverrideOption,
):
    """Spectra of L, L_c and Ltilde with constraint sets and the traversal check"""
    _launch(ExperimentTag.SPECTRUM, config, out, seed, override)


@app.command()
def monotonicity(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    override: List[str] = OverrideOption,
):
    """Weighted-mass monotonicity sweep over x0, with the bound tables"""
    _launch(ExperimentTag.MONOTONICITY_SWEEP, config, out, seed, override)


@app.command()
def stability(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    override: List[str] = OverrideOption,
):
    """Perturbed soliton: tube distance, modulation and localized convergence"""
    _launch(ExperimentTag.STABILITY, config, out, seed, override)


@app.command()
def multisoliton(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    override: List[str] = OverrideOption,
):
    """Well-separated soliton train tracked by the multi-soliton decomposition"""
    _launch(ExperimentTag.MULTISOLITON, config, out, seed, override)


@app.command()
def identities(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    override: List[str] = OverrideOption,
):
    """Operator identities, closed-form integrals and the Green identity"""
    _launch(ExperimentTag.IDENTITY_SUITE, config, out, seed, override)


@app.command()
def report(out_dir: Path = typer.Argument(..., exists=True, file_okay=False)):
    """Print the manifest summary of a finished run"""
    try:
        manifest = ArtifactStore(out_dir).read_manifest()
    except FileNotFoundError:
        console.print(f"[red]No manifest in {out_dir}[/red]")
        raise typer.Exit(code=2)
    console.print(_summary_table(manifest))
    files = Table(title="files")
    files.add_column("path")
    files.add_column("sha256", style="dim")
    for path, digest in manifest.files.items():
        files.add_row(path, digest[:16])
    console.print(files)
    if manifest.outcome != "completed":
        raise typer.Exit(code=1)


@app.command()
def batch(
    configs: List[Path] = typer.Argument(..., exists=True, dir_okay=False),
    out: Optional[Path] = typer.Option(None, "--out", help="Parent directory for the runs"),
    seed: Optional[int] = SeedOption,
    workers: int = typer.Option(MAX_WORKERS, "--workers", min=1),
):
    """Run several config files concurrently"""
    queue = ExperimentQueue(max_workers=workers)
    parent = out or OUTPUT_DIR
    for path in configs:
        try:
            cfg = load_experiment_config(path, seed=seed)
        except ConfigError as e:
            console.print(f"[red]{path}: {e}[/red]")
            raise typer.Exit(code=2)
        queue.submit(path.stem, cfg, parent / path.stem)

    asyncio.run(queue.run_all())

    table = Table(title="batch")
    for column in ("job", "status", "outcome", "error"):
        table.add_column(column)
    failed = False
    for name in queue.names():
        status = queue.get_task_status(name)
        failed = failed or status["outcome"] != "completed"
        table.add_row(name, status["status"], str(status["outcome"]), status["error"] or "")
    console.print(table)
    if failed:
        raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
