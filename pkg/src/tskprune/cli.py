"""CLI entry point for tskprune using Typer."""

import logging
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, NoReturn, Optional

import typer
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from tskprune import __version__
from tskprune.core.errors import ParameterDomainError
from tskprune.core.experiment import ExperimentRunner, evaluate_model
from tskprune.core.pruner import epoch_schedule
from tskprune.models import (
    ExperimentConfig,
    ExperimentSummary,
    MembershipKind,
    RunMode,
    SplitSpec,
)

app = typer.Typer(
    name="tskprune",
    help="Train and prune TSK fuzzy regression models with MBGD-RDA.",
    no_args_is_help=True,
)
console = Console()


class YesNo(str, Enum):
    YES = "yes"
    NO = "no"


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(f"[bold blue]tskprune[/] version {__version__}")
        raise typer.Exit()


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _fail(stage: str, message: str) -> NoReturn:
    console.print(f"[bold red]✗[/] {stage} failed: {escape(message)}")
    raise typer.Exit(code=1)


def _read_config_file(path: Path) -> dict[str, Any]:
    """Load experiment settings from YAML; keys are ExperimentConfig field names."""
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path} must contain a mapping of settings")
    return data


def _results_table(summary: ExperimentSummary) -> Table:
    compare = summary.mode == RunMode.COMPARE
    table = Table(
        title=f"[bold]{summary.mode.value} runs[/] [dim]({summary.mf_type.value})[/]",
        show_header=True,
        header_style="bold",
        border_style="dim",
    )
    table.add_column("Run", justify="right", style="cyan")
    table.add_column("Seed", justify="right")
    table.add_column("Test RMSE", justify="right")
    table.add_column("Rules", justify="right")
    if compare:
        table.add_column("Full RMSE", justify="right")
        table.add_column("Direct RMSE", justify="right")

    for record in summary.per_run:
        row = [
            str(record.run),
            str(record.seed),
            f"{record.test_rmse:.6f}",
            str(record.final_rules),
        ]
        if compare:
            row += [f"{record.full_rmse:.6f}", f"{record.direct_rmse:.6f}"]
        table.add_row(*row)
    return table


@app.callback()
def main(
    version: Annotated[
        Optional[bool],
        typer.Option(
            "--version",
            "-v",
            help="Show version and exit.",
            callback=version_callback,
            is_eager=True,
        ),
    ] = None,
) -> None:
    """tskprune - TSK fuzzy regression with rule pruning."""
    pass


@app.command()
def run(
    data: Annotated[
        Optional[Path], typer.Option("--data", help="CSV dataset; the target is one column.")
    ] = None,
    mf: Annotated[
        Optional[MembershipKind], typer.Option("--mf", help="Membership function shape.")
    ] = None,
    mode: Annotated[
        Optional[RunMode],
        typer.Option("--mode", help="Train directly, prune, or compare both."),
    ] = None,
    rules: Annotated[
        Optional[int], typer.Option("--rules", help="Rules to train (R0 when pruning).")
    ] = None,
    epochs: Annotated[
        Optional[int], typer.Option("--epochs", help="Training epochs (total when pruning).")
    ] = None,
    batch_size: Annotated[
        Optional[int], typer.Option("--batch-size", help="Mini-batch size.")
    ] = None,
    lr: Annotated[Optional[float], typer.Option("--lr", help="AdaBound learning rate.")] = None,
    l2_lambda: Annotated[
        Optional[float], typer.Option("--lambda", help="L2 penalty on consequent weights.")
    ] = None,
    droprule: Annotated[
        Optional[float],
        typer.Option("--droprule", help="Probability that DropRule keeps a rule."),
    ] = None,
    gamma: Annotated[
        Optional[float], typer.Option("--gamma", help="Firing-strength threshold factor.")
    ] = None,
    theta: Annotated[
        Optional[float], typer.Option("--theta", help="Rule similarity merge threshold.")
    ] = None,
    prune_iters: Annotated[
        Optional[int], typer.Option("--prune-iters", help="Prune iterations T (>= 2).")
    ] = None,
    repeats: Annotated[
        Optional[int], typer.Option("--repeats", help="Number of repeats.")
    ] = None,
    seed: Annotated[
        Optional[int], typer.Option("--seed", help="Base seed; repeat r uses seed + r.")
    ] = None,
    train_fraction: Annotated[
        Optional[float], typer.Option("--split", help="Training share of the samples.")
    ] = None,
    output_dir: Annotated[
        Optional[Path], typer.Option("--out", help="Directory for logs and the summary.")
    ] = None,
    header: Annotated[
        Optional[YesNo], typer.Option("--header", help="Whether the CSV has a header row.")
    ] = None,
    target_column: Annotated[
        Optional[int],
        typer.Option("--target-column", help="Target column index (negative counts back)."),
    ] = None,
    drop_constant: Annotated[
        Optional[bool],
        typer.Option(
            "--drop-constant/--reject-constant",
            help="Drop zero-variance features instead of failing.",
        ),
    ] = None,
    threads: Annotated[
        Optional[int],
        typer.Option("--threads", envvar="TSK_THREADS", help="Repeats run in parallel."),
    ] = None,
    config_file: Annotated[
        Optional[Path],
        typer.Option("--config", "-c", help="YAML file of settings; flags override it."),
    ] = None,
    verbose: Annotated[
        bool, typer.Option("--verbose", "-V", help="Log per-epoch progress.")
    ] = False,
) -> None:
    """Run repeated train, prune or compare experiments on a CSV dataset.

    Writes per-run epoch logs, prune histories and model files plus
    runs.csv and summary.json to the output directory.
    """
    _setup_logging(verbose)

    overrides = {
        "data": data,
        "mf_type": mf,
        "mode": mode,
        "num_rules": rules,
        "epochs": epochs,
        "batch_size": batch_size,
        "lr": lr,
        "l2_lambda": l2_lambda,
        "droprule_rate": droprule,
        "gamma": gamma,
        "theta": theta,
        "prune_iterations": prune_iters,
        "repeats": repeats,
        "seed": seed,
        "train_fraction": train_fraction,
        "output_dir": output_dir,
        "header": None if header is None else header == YesNo.YES,
        "target_column": target_column,
        "drop_constant": drop_constant,
        "threads": threads,
    }
    try:
        values = _read_config_file(config_file) if config_file else {}
        values.update({key: value for key, value in overrides.items() if value is not None})
        experiment = ExperimentConfig.model_validate(values)
    except (OSError, ValueError, yaml.YAMLError) as e:
        _fail("config", str(e))

    runner = ExperimentRunner(experiment)
    with console.status(f"[bold green]Running {experiment.repeats} repeat(s)..."):
        result = runner.run()

    if not result.success or result.summary is None:
        _fail(result.stage or "run", result.error or "unknown error")

    summary = result.summary
    console.print(_results_table(summary))
    console.print(
        f"[bold green]✓[/] Mean test RMSE [bold]{summary.mean_rmse:.6f}[/] "
        f"(std {summary.std_rmse:.6f}), mean rules {summary.mean_final_rules:.2f}"
    )
    if summary.mean_full_rmse is not None and summary.mean_direct_rmse is not None:
        console.print(
            f"  [dim]•[/] Full model RMSE {summary.mean_full_rmse:.6f}, "
            f"direct training RMSE {summary.mean_direct_rmse:.6f}"
        )
    console.print(f"  [dim]→ Results written to {experiment.output_dir}[/]")


@app.command()
def evaluate(
    model: Annotated[Path, typer.Argument(help="Model JSON written by 'run'.")],
    data: Annotated[Path, typer.Option("--data", help="CSV dataset to evaluate on.")],
    seed: Annotated[int, typer.Option("--seed", help="Split seed of the run.")] = 0,
    train_fraction: Annotated[
        float, typer.Option("--split", help="Training share used by the run.")
    ] = 0.7,
    header: Annotated[
        YesNo, typer.Option("--header", help="Whether the CSV has a header row.")
    ] = YesNo.NO,
    target_column: Annotated[
        int, typer.Option("--target-column", help="Target column index.")
    ] = -1,
    verbose: Annotated[bool, typer.Option("--verbose", "-V", help="Verbose logging.")] = False,
) -> None:
    """Report the test-split RMSE of a saved model.

    The split is rebuilt from --seed and --split, so pass the seed of the
    repeat that produced the model (base seed + run number).
    """
    _setup_logging(verbose)
    try:
        spec = SplitSpec(train_fraction=train_fraction, seed=seed)
    except ValidationError as e:
        _fail("config", str(e))

    result = evaluate_model(
        model, data, spec, header=header == YesNo.YES, target_column=target_column
    )
    if not result.success or result.rmse is None:
        _fail(result.stage or "evaluate", result.error or "unknown error")
    console.print(
        f"[bold green]✓[/] Test RMSE [bold]{result.rmse:.6f}[/] "
        f"[dim]({result.num_samples} samples)[/]"
    )


@app.command()
def schedule(
    total_epochs: Annotated[int, typer.Argument(help="Total epoch budget K0.")],
    iterations: Annotated[int, typer.Argument(help="Prune iterations T.")],
) -> None:
    """Show how a pruning run splits its epoch budget."""
    try:
        phases = epoch_schedule(total_epochs, iterations)
    except ParameterDomainError as e:
        _fail("config", str(e))

    table = Table(show_header=True, header_style="bold", border_style="dim")
    table.add_column("Phase", style="cyan")
    table.add_column("Epochs", justify="right")
    for index, epochs in enumerate(phases):
        table.add_row("initial training" if index == 0 else f"refine {index}", str(epochs))
    console.print(table)
    console.print(f"[bold green]✓[/] {sum(phases)} epochs in {len(phases)} phases")


if __name__ == "__main__":
    app()
