"""Pytest fixtures for tskprune tests."""

import os
from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from tskprune.core.fuzzy import TskModel
from tskprune.models import MembershipKind


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test draws the same numbers."""
    return np.random.default_rng(12345)


@pytest.fixture
def linear_data() -> tuple[np.ndarray, np.ndarray]:
    """Noiseless y = 2 x1 - x2 on 500 uniform samples."""
    X = np.random.default_rng(7).uniform(-1.0, 1.0, size=(500, 2))
    return X, 2.0 * X[:, 0] - X[:, 1]


@pytest.fixture
def gaussian_model() -> TskModel:
    """Two-rule, two-feature Gaussian model with distinct rules."""
    antecedents = np.array(
        [
            [[-0.5, 0.8], [0.2, 1.1]],
            [[0.7, 0.6], [-0.4, 0.9]],
        ]
    )
    consequents = np.array([[0.3, 1.0, -0.5], [-0.2, 0.4, 0.8]])
    return TskModel(MembershipKind.GAUSSIAN, antecedents, consequents)


@pytest.fixture
def trapezoid_model() -> TskModel:
    """Two-rule, two-feature trapezoidal model with wide supports."""
    antecedents = np.array(
        [
            [[-3.0, -0.5, 0.5, 3.0], [-2.5, -0.2, 0.4, 2.0]],
            [[-1.5, 0.0, 1.0, 4.0], [-3.0, -1.0, 0.0, 2.5]],
        ]
    )
    consequents = np.array([[0.1, -0.7, 0.5], [0.6, 0.2, -0.3]])
    return TskModel(MembershipKind.TRAPEZOID, antecedents, consequents)


def write_csv(path: Path, rows: np.ndarray, header: Optional[list[str]] = None) -> Path:
    """Write a numeric matrix as CSV, optionally with a header row."""
    lines = [",".join(header)] if header else []
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def linear_csv(tmp_path: Path, linear_data: tuple[np.ndarray, np.ndarray]) -> Path:
    """The noiseless linear task as a headerless CSV file."""
    X, y = linear_data
    return write_csv(tmp_path / "linear.csv", np.column_stack([X, y]))


@pytest.fixture
def small_csv(tmp_path: Path) -> Path:
    """A tiny noisy regression CSV with a header row, quick to train on."""
    gen = np.random.default_rng(3)
    X = gen.uniform(-2.0, 2.0, size=(80, 3))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] * X[:, 2] + 0.05 * gen.normal(size=80)
    return write_csv(tmp_path / "small.csv", np.column_stack([X, y]), ["a", "b", "c", "y"])


def benchmark_csv(variable: str) -> Path:
    """Path from an environment variable, or skip the test."""
    value = os.environ.get(variable)
    if not value or not Path(value).exists():
        pytest.skip(f"Set {variable} to the dataset CSV to run this check")
    return Path(value)
