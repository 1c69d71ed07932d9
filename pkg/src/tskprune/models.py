"""Pydantic models for tskprune."""

from enum import Enum
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MembershipKind(str, Enum):
    """Shape family shared by every membership function of a model."""

    GAUSSIAN = "gaussian"
    TRAPEZOID = "trapezoid"


class RunMode(str, Enum):
    """What an experiment does with each repeat."""

    TRAIN = "train"
    PRUNE = "prune"
    COMPARE = "compare"


class TrainConfig(BaseModel):
    """Hyperparameters of one MBGD-RDA training run."""

    num_rules: int = Field(32, ge=1)  # R
    epochs: int = Field(500, ge=0)  # K
    batch_size: int = Field(64, ge=1)  # N_bs
    droprule_rate: float = Field(0.5, gt=0.0, le=1.0)  # P
    lr: float = Field(0.01, gt=0.0)  # alpha
    l2_lambda: float = Field(0.05, ge=0.0)  # lambda
    seed: int = 0
    mf_type: MembershipKind = MembershipKind.GAUSSIAN


class PruneConfig(BaseModel):
    """Hyperparameters of the prune-and-refine procedure."""

    initial_rules: int = Field(32, ge=1)  # R0
    total_epochs: int = Field(500, ge=2)  # K0
    firing_threshold: float = Field(0.5, ge=0.0)  # gamma
    similarity_threshold: float = Field(0.5, gt=0.0, lt=1.0)  # theta
    prune_iterations: int = Field(3, ge=2)  # T
    batch_size: int = Field(64, ge=1)
    droprule_rate: float = Field(0.5, gt=0.0, le=1.0)
    lr: float = Field(0.01, gt=0.0)
    l2_lambda: float = Field(0.05, ge=0.0)
    seed: int = 0
    mf_type: MembershipKind = MembershipKind.GAUSSIAN

    @model_validator(mode="after")
    def _check_schedule(self) -> "PruneConfig":
        if self.total_epochs < self.prune_iterations:
            raise ValueError(
                f"total_epochs ({self.total_epochs}) must be at least "
                f"prune_iterations ({self.prune_iterations})"
            )
        return self

    def train_config(self, num_rules: int, epochs: int) -> TrainConfig:
        """Build the inner training configuration for one phase."""
        return TrainConfig(
            num_rules=num_rules,
            epochs=epochs,
            batch_size=self.batch_size,
            droprule_rate=self.droprule_rate,
            lr=self.lr,
            l2_lambda=self.l2_lambda,
            seed=self.seed,
            mf_type=self.mf_type,
        )


class SplitSpec(BaseModel):
    """Random train/test partition settings."""

    train_fraction: float = Field(0.7, gt=0.0, lt=1.0)
    seed: int = 0


class EpochLog(BaseModel):
    """One row of the per-epoch training log."""

    epoch: int = Field(ge=1)
    train_batch_loss: float
    test_rmse: float

    def to_row(self) -> list[Union[int, float]]:
        """Convert to a CSV row."""
        return [self.epoch, self.train_batch_loss, self.test_rmse]


class PruneRecord(BaseModel):
    """Outcome of one pruning round."""

    iteration: int = Field(ge=1)
    rules_before: int
    removed_by_gamma: int
    removed_by_theta: int
    rules_after: int
    test_rmse: float

    def to_row(self) -> list[Union[int, float]]:
        """Convert to a CSV row."""
        return [
            self.iteration,
            self.rules_before,
            self.removed_by_gamma,
            self.removed_by_theta,
            self.rules_after,
            self.test_rmse,
        ]


class PreprocessingParams(BaseModel):
    """Training-split statistics used to normalize any split."""

    num_input_features: int = Field(ge=1)  # raw feature columns before dropping
    feature_means: list[float]
    feature_stds: list[float]
    kept_features: list[int]  # indices into the raw feature columns
    target_mean: float


class GaussianDocument(BaseModel):
    """Serialized Gaussian membership function."""

    center: float
    spread: float


class TrapezoidDocument(BaseModel):
    """Serialized trapezoidal membership function."""

    a: float
    b: float
    c: float
    d: float


class RuleDocument(BaseModel):
    """Serialized rule: antecedent MFs plus first-order consequent."""

    antecedents: list[Union[GaussianDocument, TrapezoidDocument]]
    bias: float
    weights: list[float]


class ModelDocument(BaseModel):
    """JSON schema of a saved TSK model."""

    mf_type: MembershipKind
    num_features: int = Field(ge=1)
    rules: list[RuleDocument] = Field(min_length=1)
    preprocessing: Optional[PreprocessingParams] = None


class ExperimentConfig(BaseModel):
    """Configuration for a repeated train/prune experiment."""

    model_config = ConfigDict(extra="forbid")

    data: Path
    mf_type: MembershipKind = MembershipKind.GAUSSIAN
    mode: RunMode = RunMode.TRAIN
    num_rules: int = Field(32, ge=1)
    epochs: int = Field(500, ge=0)
    batch_size: int = Field(64, ge=1)
    lr: float = Field(0.01, gt=0.0)
    l2_lambda: float = Field(0.05, ge=0.0)
    droprule_rate: float = Field(0.5, gt=0.0, le=1.0)
    gamma: float = Field(0.5, ge=0.0)
    theta: float = Field(0.5, gt=0.0, lt=1.0)
    prune_iterations: int = Field(3, ge=2)
    repeats: int = Field(1, ge=1)
    seed: int = 0
    train_fraction: float = Field(0.7, gt=0.0, lt=1.0)
    output_dir: Path = Path("results")
    header: bool = False
    target_column: int = -1
    drop_constant: bool = False
    threads: int = Field(1, ge=1)

    def train_config(self, seed: int, num_rules: Optional[int] = None) -> TrainConfig:
        """Training configuration for the repeat using ``seed``."""
        return TrainConfig(
            num_rules=self.num_rules if num_rules is None else num_rules,
            epochs=self.epochs,
            batch_size=self.batch_size,
            droprule_rate=self.droprule_rate,
            lr=self.lr,
            l2_lambda=self.l2_lambda,
            seed=seed,
            mf_type=self.mf_type,
        )

    def prune_config(self, seed: int) -> PruneConfig:
        """Pruning configuration for the repeat using ``seed``."""
        return PruneConfig(
            initial_rules=self.num_rules,
            total_epochs=self.epochs,
            firing_threshold=self.gamma,
            similarity_threshold=self.theta,
            prune_iterations=self.prune_iterations,
            batch_size=self.batch_size,
            droprule_rate=self.droprule_rate,
            lr=self.lr,
            l2_lambda=self.l2_lambda,
            seed=seed,
            mf_type=self.mf_type,
        )

    def split_spec(self, seed: int) -> SplitSpec:
        """Split settings for the repeat using ``seed``."""
        return SplitSpec(train_fraction=self.train_fraction, seed=seed)

    @property
    def summary_path(self) -> Path:
        """Get the path to summary.json."""
        return self.output_dir / "summary.json"

    @property
    def runs_path(self) -> Path:
        """Get the path to runs.csv."""
        return self.output_dir / "runs.csv"

    @property
    def improvement_path(self) -> Path:
        """Get the path to improvement.csv (compare mode only)."""
        return self.output_dir / "improvement.csv"

    def epochs_path(self, run: int) -> Path:
        """Get the per-epoch log path of one repeat."""
        return self.output_dir / f"run_{run:03d}_epochs.csv"

    def prune_path(self, run: int) -> Path:
        """Get the prune history path of one repeat."""
        return self.output_dir / f"run_{run:03d}_prune.csv"

    def model_path(self, run: int) -> Path:
        """Get the model file path of one repeat."""
        return self.output_dir / f"run_{run:03d}_model.json"


class RunRecord(BaseModel):
    """Final numbers of one repeat."""

    run: int
    seed: int
    test_rmse: float
    final_rules: int
    full_rmse: Optional[float] = None  # compare mode: R0 rules trained directly
    direct_rmse: Optional[float] = None  # compare mode: R rules trained directly

    def to_row(self) -> list[Union[int, float, str]]:
        """Convert to a CSV row."""
        return [
            self.run,
            self.seed,
            self.test_rmse,
            self.final_rules,
            "" if self.full_rmse is None else self.full_rmse,
            "" if self.direct_rmse is None else self.direct_rmse,
        ]


class ExperimentSummary(BaseModel):
    """Aggregate results written to summary.json."""

    mode: RunMode
    mf_type: MembershipKind
    repeats: int
    mean_rmse: float
    std_rmse: float
    mean_final_rules: float
    mean_full_rmse: Optional[float] = None
    mean_direct_rmse: Optional[float] = None
    per_run: list[RunRecord] = Field(default_factory=list)
