"""CSV ingestion, z-normalization and random train/test splitting."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..models import PreprocessingParams, SplitSpec
from .errors import DatasetLoadError, InputShapeError, PreprocessingError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, targets and the column names they came from.

    ``preprocessing`` is set once the data has been normalized.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    preprocessing: Optional[PreprocessingParams] = None

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        targets = np.asarray(self.targets, dtype=float).ravel()
        if features.ndim != 2:
            raise InputShapeError(f"Features must be an (N, M) matrix, got {features.shape}")
        if targets.shape[0] != features.shape[0]:
            raise InputShapeError(
                f"Got {features.shape[0]} feature rows but {targets.shape[0]} targets"
            )
        names = list(self.feature_names) or [f"x{k + 1}" for k in range(features.shape[1])]
        if len(names) != features.shape[1]:
            raise InputShapeError(
                f"Got {len(names)} feature names for {features.shape[1]} columns"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", names)

    @property
    def num_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: Union[np.ndarray, list[int]]) -> "Dataset":
        """Rows ``indices`` of this dataset, in that order."""
        rows = np.asarray(indices, dtype=int)
        return replace(self, features=self.features[rows], targets=self.targets[rows])


def _first_bad_cell(text: pd.DataFrame, values: np.ndarray) -> Optional[DatasetLoadError]:
    missing = (text == "").to_numpy()
    bad = np.argwhere(missing | ~np.isfinite(values))
    if bad.size == 0:
        return None
    position, column = (int(k) for k in bad[0])
    # Without skipped lines the frame index is the 0-based file line
    row = int(text.index[position]) + 1
    cell = text.iat[position, column]
    if missing[position, column]:
        return DatasetLoadError("Empty or missing cell", row=row, column=column + 1)
    if np.isnan(values[position, column]):
        return DatasetLoadError(f"Non-numeric value {cell!r}", row=row, column=column + 1)
    return DatasetLoadError(f"Non-finite value {cell!r}", row=row, column=column + 1)


def load_csv(path: Path, header: bool = False, target_column: int = -1) -> Dataset:
    """Read a numeric CSV file; one column is the target, the rest are features.

    Row and column numbers in errors are 1-based file positions, so a header
    row counts as row 1.
    """
    if not path.exists():
        raise DatasetLoadError(f"Data file not found: {path}")

    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8-sig",
        )
    except pd.errors.EmptyDataError:
        raise DatasetLoadError(f"No data rows in {path}") from None
    except pd.errors.ParserError as e:
        raise DatasetLoadError(f"Malformed CSV: {e}") from e
    except UnicodeDecodeError as e:
        raise DatasetLoadError(f"{path} is not valid UTF-8: {e.reason}") from e

    text = raw.fillna("").astype(str).apply(lambda column: column.str.strip())
    text = text[~(text == "").all(axis=1)]
    names: list[str] = []
    if header and not text.empty:
        names = text.iloc[0].tolist()
        text = text.iloc[1:]
    if text.empty:
        raise DatasetLoadError(f"No data rows in {path}")

    width = text.shape[1]
    if width < 2:
        raise DatasetLoadError("Need at least one feature column and one target column")
    if not -width <= target_column < width:
        raise DatasetLoadError(
            f"Target column {target_column} out of range for {width} columns"
        )

    values = text.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    failure = _first_bad_cell(text, values)
    if failure is not None:
        raise failure

    target_index = target_column % width
    feature_columns = [k for k in range(width) if k != target_index]
    feature_names = [names[k] for k in feature_columns] if names else []
    logger.info("Loaded %d samples with %d features from %s", len(values), width - 1, path)
    return Dataset(values[:, feature_columns], values[:, target_index], feature_names)


def fit_transform(
    train: Dataset, drop_constant: bool = False
) -> tuple[Dataset, PreprocessingParams]:
    """Z-normalize features and center targets using this split's statistics.

    Standard deviations use the population convention. A constant feature
    raises PreprocessingError unless ``drop_constant`` is set, in which case
    it is removed with a warning.
    """
    if train.num_samples == 0:
        raise PreprocessingError("Cannot fit preprocessing on an empty training set")

    means = train.features.mean(axis=0)
    stds = train.features.std(axis=0)
    # Rounding leaves a tiny nonzero std on some constant columns
    varying = np.ptp(train.features, axis=0) > 0.0
    constant = np.flatnonzero(~varying)
    if constant.size:
        names = ", ".join(train.feature_names[k] for k in constant)
        if not drop_constant:
            raise PreprocessingError(f"Zero-variance feature(s) in the training set: {names}")
        logger.warning("Dropping zero-variance feature(s): %s", names)
    kept = np.flatnonzero(varying)
    if kept.size == 0:
        raise PreprocessingError("Every feature is constant in the training set")

    params = PreprocessingParams(
        num_input_features=train.num_features,
        feature_means=means[kept].tolist(),
        feature_stds=stds[kept].tolist(),
        kept_features=kept.tolist(),
        target_mean=float(train.targets.mean()),
    )
    return apply(params, train), params


def apply(params: PreprocessingParams, dataset: Dataset) -> Dataset:
    """Transform ``dataset`` with previously fitted statistics."""
    if dataset.num_features != params.num_input_features:
        raise InputShapeError(
            f"Preprocessing was fitted on {params.num_input_features} features, "
            f"dataset has {dataset.num_features}"
        )
    kept = np.asarray(params.kept_features, dtype=int)
    features = (dataset.features[:, kept] - np.asarray(params.feature_means)) / np.asarray(
        params.feature_stds
    )
    return Dataset(
        features=features,
        targets=dataset.targets - params.target_mean,
        feature_names=[dataset.feature_names[k] for k in kept],
        preprocessing=params,
    )


def split(num_samples: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Random train/test partition of range(num_samples).

    The train share is round(train_fraction * N), kept within [1, N - 1].
    Both index arrays are returned sorted.
    """
    if num_samples < 2:
        raise InputShapeError(f"Need at least 2 samples to split, got {num_samples}")
    train_size = int(np.floor(spec.train_fraction * num_samples + 0.5))
    train_size = min(max(train_size, 1), num_samples - 1)
    order = np.random.default_rng(spec.seed).permutation(num_samples)
    return np.sort(order[:train_size]), np.sort(order[train_size:])
