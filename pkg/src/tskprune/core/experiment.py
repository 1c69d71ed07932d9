"""Repeated train / prune experiments and model evaluation."""

import logging
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..models import (
    EpochLog,
    ExperimentConfig,
    ExperimentSummary,
    PreprocessingParams,
    PruneRecord,
    RunMode,
    RunRecord,
    SplitSpec,
)
from .dataset import Dataset, apply, fit_transform, load_csv, split
from .errors import InputShapeError
from .fuzzy import TskModel, load_model, predict, rmse, save_model
from .pruner import prune_and_refine
from .trainer import train

logger = logging.getLogger(__name__)

EPOCH_COLUMNS = ["epoch", "train_batch_loss", "test_rmse"]
PRUNE_COLUMNS = [
    "iteration",
    "rules_before",
    "removed_by_gamma",
    "removed_by_theta",
    "rules_after",
    "test_rmse",
]
RUN_COLUMNS = ["run", "seed", "test_rmse", "final_rules", "full_rmse", "direct_rmse"]
IMPROVEMENT_COLUMNS = ["epoch", "pruned_improvement", "direct_improvement"]


class StageFailure(Exception):
    """An error raised while a named experiment stage was running."""

    def __init__(self, stage: str, error: Exception) -> None:
        super().__init__(f"{stage} failed: {error}")
        self.stage = stage
        self.error = error


@contextmanager
def _stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageFailure:
        raise
    except Exception as e:
        raise StageFailure(name, e) from e


@dataclass
class RunOutcome:
    """Everything one repeat produced."""

    record: RunRecord
    model: TskModel
    preprocessing: PreprocessingParams
    epochs: list[EpochLog] = field(default_factory=list)
    prune_history: list[PruneRecord] = field(default_factory=list)
    full_epochs: list[EpochLog] = field(default_factory=list)
    direct_epochs: list[EpochLog] = field(default_factory=list)


@dataclass
class ExperimentResult:
    """Result of an experiment run."""

    success: bool
    summary: Optional[ExperimentSummary] = None
    error: Optional[str] = None
    stage: Optional[str] = None
    written_paths: list[str] = field(default_factory=list)


@dataclass
class EvaluationResult:
    """Result of evaluating a saved model on a dataset's test split."""

    success: bool
    rmse: Optional[float] = None
    num_samples: int = 0
    error: Optional[str] = None
    stage: Optional[str] = None


def _test_rmse(model: TskModel, test: Dataset) -> float:
    return rmse(predict(model, test.features), test.targets)


def _write_csv(path: Path, columns: list[str], rows: Sequence[Sequence[object]]) -> None:
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False, na_rep="nan", lineterminator="\n", encoding="utf-8")


def improvement_curves(outcomes: Sequence[RunOutcome]) -> list[list[Union[int, float]]]:
    """Per-epoch percentage improvement of pruned and direct runs over full runs.

    Each entry is 100 * (full - other) / full, averaged over repeats and
    limited to the epochs every curve covers.
    """
    length = min(
        min(len(o.full_epochs), len(o.epochs), len(o.direct_epochs)) for o in outcomes
    )
    rows: list[list[Union[int, float]]] = []
    for index in range(length):
        full = np.array([o.full_epochs[index].test_rmse for o in outcomes])
        pruned = np.array([o.epochs[index].test_rmse for o in outcomes])
        direct = np.array([o.direct_epochs[index].test_rmse for o in outcomes])
        with np.errstate(divide="ignore", invalid="ignore"):
            rows.append(
                [
                    index + 1,
                    float(np.mean(100.0 * (full - pruned) / full)),
                    float(np.mean(100.0 * (full - direct) / full)),
                ]
            )
    return rows


def summarize(config: ExperimentConfig, records: Sequence[RunRecord]) -> ExperimentSummary:
    """Aggregate per-run records; the spread is the population standard deviation."""
    rmses = np.array([r.test_rmse for r in records])
    full = [r.full_rmse for r in records if r.full_rmse is not None]
    direct = [r.direct_rmse for r in records if r.direct_rmse is not None]
    return ExperimentSummary(
        mode=config.mode,
        mf_type=config.mf_type,
        repeats=len(records),
        mean_rmse=float(rmses.mean()),
        std_rmse=float(rmses.std()),
        mean_final_rules=float(np.mean([r.final_rules for r in records])),
        mean_full_rmse=float(np.mean(full)) if full else None,
        mean_direct_rmse=float(np.mean(direct)) if direct else None,
        per_run=list(records),
    )


class ExperimentRunner:
    """Runs every repeat of an experiment and writes its logs and summary.

    Repeat r uses seed ``config.seed + r`` for its split, clustering, batch
    sampling and DropRule masks, so any repeat can be re-run on its own.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self) -> ExperimentResult:
        """Run all repeats and write results to ``config.output_dir``."""
        result = ExperimentResult(success=True)
        try:
            with _stage("config"):
                self._check_config()
            with _stage("load"):
                dataset = load_csv(
                    self.config.data,
                    header=self.config.header,
                    target_column=self.config.target_column,
                )

            runs = range(self.config.repeats)
            if self.config.threads > 1 and self.config.repeats > 1:
                with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                    outcomes = list(pool.map(lambda run: self.run_repeat(dataset, run), runs))
            else:
                outcomes = [self.run_repeat(dataset, run) for run in runs]

            with _stage("write"):
                summary = summarize(self.config, [o.record for o in outcomes])
                result.written_paths = self._write(outcomes, summary)
            result.summary = summary
            logger.info(
                "Finished %d repeats: mean test RMSE %.6g, mean rules %.2f",
                summary.repeats,
                summary.mean_rmse,
                summary.mean_final_rules,
            )
        except StageFailure as e:
            result.success = False
            result.stage = e.stage
            result.error = str(e.error)
            logger.debug("Experiment stage %s failed", e.stage, exc_info=e.error)
        return result

    def _check_config(self) -> None:
        if self.config.mode != RunMode.TRAIN:
            self.config.prune_config(self.config.seed)

    def run_repeat(self, dataset: Dataset, run: int) -> RunOutcome:
        """Split, preprocess and fit one repeat."""
        config = self.config
        seed = config.seed + run
        logger.info("Repeat %d/%d (seed %d)", run + 1, config.repeats, seed)

        with _stage("split"):
            train_rows, test_rows = split(dataset.num_samples, config.split_spec(seed))
        with _stage("preprocess"):
            train_set, params = fit_transform(
                dataset.subset(train_rows), drop_constant=config.drop_constant
            )
            test_set = apply(params, dataset.subset(test_rows))

        X, y = train_set.features, train_set.targets
        X_test, y_test = test_set.features, test_set.targets

        if config.mode == RunMode.TRAIN:
            with _stage("train"):
                trained = train(X, y, X_test, y_test, config.train_config(seed))
                model = trained.model
                return RunOutcome(
                    record=RunRecord(
                        run=run,
                        seed=seed,
                        test_rmse=_test_rmse(model, test_set),
                        final_rules=model.num_rules,
                    ),
                    model=model,
                    preprocessing=params,
                    epochs=trained.history,
                )

        with _stage("prune"):
            pruned = prune_and_refine(X, y, X_test, y_test, config.prune_config(seed))
        outcome = RunOutcome(
            record=RunRecord(
                run=run,
                seed=seed,
                test_rmse=_test_rmse(pruned.model, test_set),
                final_rules=pruned.model.num_rules,
            ),
            model=pruned.model,
            preprocessing=params,
            epochs=pruned.epochs,
            prune_history=pruned.history,
        )
        if config.mode == RunMode.COMPARE:
            with _stage("compare"):
                full = train(X, y, X_test, y_test, config.train_config(seed))
                direct = train(
                    X,
                    y,
                    X_test,
                    y_test,
                    config.train_config(seed, num_rules=pruned.model.num_rules),
                )
            outcome.full_epochs = full.history
            outcome.direct_epochs = direct.history
            outcome.record.full_rmse = _test_rmse(full.model, test_set)
            outcome.record.direct_rmse = _test_rmse(direct.model, test_set)
        return outcome

    def _write(self, outcomes: Sequence[RunOutcome], summary: ExperimentSummary) -> list[str]:
        config = self.config
        config.output_dir.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []

        for outcome in outcomes:
            run = outcome.record.run
            _write_csv(
                config.epochs_path(run), EPOCH_COLUMNS, [log.to_row() for log in outcome.epochs]
            )
            written.append(config.epochs_path(run))
            if config.mode != RunMode.TRAIN:
                _write_csv(
                    config.prune_path(run),
                    PRUNE_COLUMNS,
                    [record.to_row() for record in outcome.prune_history],
                )
                written.append(config.prune_path(run))
            written.append(
                save_model(outcome.model, config.model_path(run), outcome.preprocessing)
            )

        _write_csv(config.runs_path, RUN_COLUMNS, [o.record.to_row() for o in outcomes])
        written.append(config.runs_path)
        if config.mode == RunMode.COMPARE:
            _write_csv(config.improvement_path, IMPROVEMENT_COLUMNS, improvement_curves(outcomes))
            written.append(config.improvement_path)
        config.summary_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        written.append(config.summary_path)
        return [str(path) for path in written]


def evaluate_model(
    model_path: Path,
    data_path: Path,
    spec: SplitSpec,
    header: bool = False,
    target_column: int = -1,
) -> EvaluationResult:
    """Test RMSE of a saved model on the test split of ``data_path``.

    The recorded preprocessing, when present, is reapplied to the test split
    so the figure matches the one logged during training.
    """
    result = EvaluationResult(success=True)
    try:
        with _stage("load"):
            model, params = load_model(model_path)
            dataset = load_csv(data_path, header=header, target_column=target_column)
        with _stage("split"):
            _, test_rows = split(dataset.num_samples, spec)
        with _stage("preprocess"):
            test_set = dataset.subset(test_rows)
            if params is not None:
                test_set = apply(params, test_set)
        with _stage("evaluate"):
            if test_set.num_features != model.num_features:
                raise InputShapeError(
                    f"Model expects {model.num_features} features, "
                    f"dataset provides {test_set.num_features}"
                )
            result.rmse = _test_rmse(model, test_set)
            result.num_samples = test_set.num_samples
    except StageFailure as e:
        result.success = False
        result.stage = e.stage
        result.error = str(e.error)
    return result
